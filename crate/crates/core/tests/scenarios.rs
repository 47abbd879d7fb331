use std::io::Write;

use emato::scenarios::{
    run_acc, run_cc_png, run_frenet, DrivingCycle, EventKind, FuelModel, RunResult, ScenarioConfig,
};

fn config(algo: &str) -> ScenarioConfig {
    ScenarioConfig { algorithm: algo.into(), fuel: FuelModel::SyntheticFit, ..Default::default() }
}

/// Leader cruising at 20 m/s that brakes to a stop at 5 m/s² and waits.
fn braking_leader() -> DrivingCycle {
    let mut t = Vec::new();
    let mut v = Vec::new();
    for i in 0..=800 {
        let ti = i as f64 * 0.1;
        let vi = if ti < 40.0 { 20.0 } else { (20.0 - 5.0 * (ti - 40.0)).max(0.0) };
        t.push(ti);
        v.push(vi);
    }
    DrivingCycle::new("brake", t, v).unwrap()
}

fn fuel_consistent(r: &RunResult) {
    let (a, b) = (r.rollout_fuel_ml, r.metrics.fuel_ml);
    assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{}: rollouts {a} vs metrics {b}", r.algorithm);
}

#[test]
fn hard_braking_leader_keeps_the_safe_gap() {
    let cycle = braking_leader();
    for algo in ["quintic", "emato-b", "emato-r", "emato-v"] {
        let mut cfg = config(algo);
        cfg.distance_budget = None;
        let r = run_acc(&cfg, &cycle).unwrap();
        assert_eq!(r.collisions(), 0, "{algo}: {:?}", r.events);
        let gap = r.min_separation.unwrap();
        assert!(gap >= cfg.acc.gap_min - 1e-6, "{algo}: min gap {gap}");
        let last = r.steps.last().unwrap();
        assert!(last.v < 0.5, "{algo} still moving at {}", last.v);
    }
}

#[test]
fn rollout_fuel_matches_metrics() {
    let mut cfg = config("emato-r");
    cfg.distance_budget = Some(1500.0);
    let cycle = cfg.cycle.load().unwrap();
    fuel_consistent(&run_acc(&cfg, &cycle).unwrap());

    let mut cfg = config("emato-fe");
    cfg.frenet.distance = 500.0;
    fuel_consistent(&run_frenet(&cfg).unwrap());

    let png = run_cc_png(&config("png")).unwrap();
    for r in [&png.cc, &png.emato, &png.energy] {
        fuel_consistent(r);
    }
}

#[test]
fn acc_runs_are_deterministic() {
    let mut cfg = config("emato-b");
    cfg.distance_budget = Some(1200.0);
    let cycle = cfg.cycle.load().unwrap();
    let a = run_acc(&cfg, &cycle).unwrap();
    let b = run_acc(&cfg, &cycle).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn frenet_seed_moves_traffic_only() {
    let mut cfg = config("qf-e");
    cfg.frenet.distance = 400.0;
    let a = run_frenet(&cfg).unwrap();
    let b = run_frenet(&cfg).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    cfg.seed = 3;
    let c = run_frenet(&cfg).unwrap();
    assert_eq!(c.collisions(), 0);
}

#[test]
fn without_fuel_weight_png_collapses_to_cruise() {
    let mut cfg = config("png");
    cfg.weights.png = [0.0, 1.0, 1.0, 1.0, 0.0];
    let o = run_cc_png(&cfg).unwrap();
    let (cc, e) = (o.cc.metrics.fuel_ml, o.emato.metrics.fuel_ml);
    assert!((cc - e).abs() <= 1e-3 * cc, "cc {cc} vs emato {e}");
    let vmax = o.emato.steps.iter().map(|s| s.v).fold(0.0, f64::max);
    assert!(vmax - cfg.png.v_d < 0.05, "peak {vmax}");
}

#[test]
fn png_course_length_is_exact() {
    let mut cfg = config("png");
    cfg.png.distance = 450.0;
    let o = run_cc_png(&cfg).unwrap();
    for r in [&o.cc, &o.emato, &o.energy] {
        assert!((r.metrics.distance - 450.0).abs() < 1e-6, "{}: {}", r.algorithm, r.metrics.distance);
    }
}

#[test]
fn short_cycle_file_ends_the_run_with_a_warning_event() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "time_s,speed_mph").unwrap();
    for i in 0..=60 {
        writeln!(f, "{i},{}", if i < 5 { i as f64 * 4.0 } else { 20.0 }).unwrap();
    }
    let cycle = DrivingCycle::from_csv(f.path(), true).unwrap();
    assert!((cycle.speed_at(30.0) - 20.0 * 0.44704).abs() < 1e-9);

    let cfg = config("emato-b");
    let r = run_acc(&cfg, &cycle).unwrap();
    assert!(r.events.iter().any(|e| e.kind == EventKind::CycleExhausted));
    assert!(r.metrics.distance > 300.0 && r.metrics.distance < cfg.distance_budget.unwrap());
    assert_eq!(r.collisions(), 0);
}

#[test]
fn quintic_baseline_cannot_leave_rest_behind_a_fast_leader() {
    // A rest-to-speed quintic over the horizon peaks at 1.875·v/T, above the
    // truck's 2 m/s² once the leader passes ~6.5 m/s; the ego stays put and
    // the run has no distance to rate.
    let t: Vec<f64> = (0..=60).map(f64::from).collect();
    let v = t.iter().map(|&t| (t * 1.8).min(9.0)).collect();
    let cycle = DrivingCycle::new("fast", t, v).unwrap();
    assert!(matches!(run_acc(&config("quintic"), &cycle), Err(emato::Error::UndefinedEfficiency)));
}

#[test]
fn sedan_runs_on_every_slope() {
    for slope in [emato::dynamics::SlopeProfile::rolling(), emato::dynamics::SlopeProfile::steep()] {
        let mut cfg = config("emato-b");
        cfg.vehicle = emato::scenarios::VehicleKind::Sedan;
        cfg.slope = slope;
        cfg.distance_budget = Some(1000.0);
        let cycle = cfg.cycle.load().unwrap();
        let r = run_acc(&cfg, &cycle).unwrap();
        assert_eq!(r.collisions(), 0);
        assert!(r.metrics.mpg.is_finite() && r.metrics.mpg > 0.0);
    }
}
