use emato::dynamics::{KinState, VehicleParams};
use emato::optimizer::{
    acc_constraints, build_problem, gap_spec, solve, AccParams, AccVariant, ConstraintSpec, EmatoProblem,
    IpmOptions, LeadPrediction, Nlp, Status, NV,
};
use emato::polytraj::{evaluate_objective, Quintic, Weights};
use emato::trajectory::Trajectory;

fn cruise(v: f64, n: usize) -> Trajectory<f64> {
    Trajectory::from_kinematics(
        0.1,
        0.0,
        (0..n).map(|k| k as f64 * 0.1 * v).collect(),
        vec![v; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        None,
        &VehicleParams::truck(),
    )
}

fn assert_solution_valid(p: &EmatoProblem<f64>, x: &[f64]) {
    let lim = &p.params.limits;
    assert!(p.max_defect(x) <= 1e-6);
    let z = p.trajectory(x);
    for k in 0..p.n_t {
        let at = p.traction(x, k);
        assert!(at >= -1e-6 && at <= lim.a_t_max + 1e-6, "a_t {at} at {k}");
        assert!(x[NV * k + 4] >= -1e-9 && x[NV * k + 4] <= lim.a_b_max + 1e-9);
        assert!(z.v[k] >= -1e-9 && z.v[k] <= lim.v_max + 1e-9);
        assert!(z.j[k].abs() <= lim.j_max + 1e-9);
    }
}

#[test]
fn optimal_warm_start_is_returned() {
    let z = cruise(20.0, 50);
    let w = Weights::new([1.0, 0.5, 0.5, 0.5, 0.0], 20.0);
    let p = build_problem(&z, &z.theta, ConstraintSpec::bvp(), w, &VehicleParams::truck()).unwrap();
    let sol = solve(&p, &IpmOptions::default());
    assert_eq!(sol.stats.status, Status::Solved);
    assert!(sol.stats.iterations <= 2);
    assert_eq!(sol.x, p.warm);
}

#[test]
fn fuel_weight_beats_cruise() {
    let z = cruise(20.0, 50);
    let params = VehicleParams::truck();
    let w = Weights::new([0.0, 1e-4, 1e-4, 1e-4, 35.0], 20.0);
    let p = build_problem(&z, &z.theta, ConstraintSpec::bvp(), w, &params).unwrap();
    let sol = solve(&p, &IpmOptions::default());
    assert_eq!(sol.stats.status, Status::Solved, "{:?}", sol.stats);
    assert_solution_valid(&p, &sol.x);
    let zo = p.trajectory(&sol.x);
    assert!((zo.l[49] - z.l[49]).abs() < 1e-6);
    assert!(evaluate_objective(&zo, &w) <= evaluate_objective(&z, &w) + 1e-8);
    assert!(zo.total_fuel() < z.total_fuel(), "{} vs {}", zo.total_fuel(), z.total_fuel());
    assert!(sol.stats.max_violation <= 1e-6);
}

#[test]
fn solve_is_deterministic() {
    let z = cruise(18.0, 50);
    let w = Weights::new([0.0, 14.51, 14.51, 1.16, 38.91], 18.0);
    let p = build_problem(&z, &z.theta, ConstraintSpec::bvp(), w, &VehicleParams::truck()).unwrap();
    let a = solve(&p, &IpmOptions::default());
    let b = solve(&p, &IpmOptions::default());
    assert_eq!(a.x, b.x);
    assert_eq!(a.stats.iterations, b.stats.iterations);
}

fn lead(v: f64) -> LeadPrediction {
    LeadPrediction { l: (0..50).map(|k| 80.0 + 0.1 * k as f64 * v).collect(), v: vec![v; 50] }
}

fn acc_problem(variant: AccVariant, acc: &AccParams) -> EmatoProblem<f64> {
    let q = Quintic::fit(KinState::new(0.0, 20.0, 0.0), KinState::new(98.0, 20.0, 0.0), 4.9).unwrap();
    let z = q.to_trajectory(50, 0.1, 0.0, vec![0.0; 50], &VehicleParams::truck());
    let spec = gap_spec(variant, &lead(20.0), acc);
    // Same weights for every variant; v_d equals the leader speed here.
    let w = Weights::new([0.01, 14.51, 14.51, 1.16, 38.91], 20.0);
    build_problem(&z, &z.theta, spec, w, &VehicleParams::truck()).unwrap()
}

#[test]
fn empty_gap_corridor_is_infeasible() {
    let acc = AccParams { gap_min: 50.0, gap_max: 40.0, ..AccParams::default() };
    let sol = solve(&acc_problem(AccVariant::B, &acc), &IpmOptions::default());
    assert_eq!(sol.stats.status, Status::Infeasible);
    assert_eq!(sol.stats.diagnostic.as_deref(), Some("gap bounds"));
}

#[test]
fn relaxation_is_monotone() {
    let acc = AccParams::default();
    let mut obj = Vec::new();
    for v in [AccVariant::B, AccVariant::R, AccVariant::V] {
        let p = acc_problem(v, &acc);
        let sol = solve(&p, &IpmOptions::default());
        assert_eq!(sol.stats.status, Status::Solved, "{v:?}: {:?}", sol.stats);
        assert_solution_valid(&p, &sol.x);
        obj.push(sol.stats.objective);
    }
    assert!(obj[2] <= obj[1] + 1e-6 && obj[1] <= obj[0] + 1e-6, "{obj:?}");
}

#[test]
fn acc_b_hits_policy_gap() {
    let p = acc_problem(AccVariant::B, &AccParams::default());
    let sol = solve(&p, &IpmOptions::default());
    let l_end = sol.x[NV * 49];
    assert!((lead(20.0).l[49] - l_end - 80.0).abs() < 1e-6);
    let spec: ConstraintSpec<f64> = acc_constraints(AccVariant::B, &lead(20.0), &AccParams::default()).unwrap();
    assert_eq!(spec, p.spec);
}

#[test]
fn single_precision_solve() {
    let z64 = cruise(20.0, 50);
    let params = VehicleParams::<f32>::truck();
    let z = Trajectory::<f32>::from_kinematics(
        0.1,
        0.0,
        z64.l.iter().map(|x| *x as f32).collect(),
        vec![20.0; 50],
        vec![0.0; 50],
        vec![0.0; 50],
        vec![0.0; 50],
        None,
        &params,
    );
    let w = Weights::<f32>::new([0.0, 1e-4, 1e-4, 1e-4, 35.0], 20.0);
    let p = build_problem(&z, &z.theta, ConstraintSpec::bvp(), w, &params).unwrap();
    let opts = IpmOptions { tol_feas: 1e-3, tol_opt: 1e-3, ..IpmOptions::default() };
    let sol = solve(&p, &opts);
    assert_ne!(sol.stats.status, Status::Infeasible);
    assert!(p.objective(&sol.x) <= p.objective(&p.warm) + 1e-3);
}
