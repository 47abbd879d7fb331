//! Closed-loop scenario harnesses and their reporting.

pub mod acc;
pub mod config;
pub mod cycle;
pub mod export;
pub mod frenet;
pub mod metrics;
pub mod png;
pub mod safety;

pub use acc::{run_acc, AccAlgo};
pub use config::{CycleSource, FuelModel, FrenetParams, PngParams, ScenarioConfig, VehicleKind, WeightTable};
pub use cycle::{composite, lead_prediction, synthetic_highway, synthetic_urban, DrivingCycle};
pub use export::{write_steps_csv, Event, EventKind, PlanSource, Rollout, RunResult, StepRow};
pub use frenet::{run_frenet, FrenetAlgo};
pub use metrics::{compute_metrics, mpg_from_ml_per_m, Metrics, MPG_PER_M_PER_ML};
pub use png::{run_cc_png, PngOutcome};
pub use safety::{homotopy_safety_check, SafetyVerdict};

use crate::dynamics::{integrate_state, KinState, SlopeProfile, VehicleParams};
use crate::polytraj::Quintic;
use crate::trajectory::Trajectory;

const LIMIT_TOL: f64 = 1e-9;

/// Longitudinal limits including the traction bound.
pub fn limits_ok(z: &Trajectory<f64>, params: &VehicleParams<f64>) -> bool {
    let lim = &params.limits;
    (0..z.len()).all(|k| {
        z.v[k] >= -LIMIT_TOL
            && z.v[k] <= lim.v_max + LIMIT_TOL
            && z.a[k] <= lim.a_v_max + LIMIT_TOL
            && z.a[k] >= -lim.a_b_max - LIMIT_TOL
            && z.j[k].abs() <= lim.j_max + LIMIT_TOL
            && z.a_t[k] <= lim.a_t_max + LIMIT_TOL
            && z.a_b[k] <= lim.a_b_max + LIMIT_TOL
    })
}

/// Samples a quintic with the grade looked up at its own distance.
pub fn quintic_traj(
    q: &Quintic<f64>,
    n: usize,
    dt: f64,
    t0: f64,
    slope: &SlopeProfile,
    params: &VehicleParams<f64>,
) -> Trajectory<f64> {
    let theta = (0..n).map(|k| slope.theta(q.pos(k as f64 * dt))).collect();
    q.to_trajectory(n, dt, t0, theta, params)
}

/// Recomputes grade-dependent columns at the trajectory's own distance,
/// keeping its brake command.
pub fn regrade(z: &Trajectory<f64>, slope: &SlopeProfile, params: &VehicleParams<f64>) -> Trajectory<f64> {
    let theta = z.l.iter().map(|l| slope.theta(*l)).collect();
    Trajectory::from_kinematics(
        z.dt,
        z.t.first().copied().unwrap_or(0.0),
        z.l.clone(),
        z.v.clone(),
        z.a.clone(),
        z.j.clone(),
        theta,
        Some(z.a_b.clone()),
        params,
    )
}

/// Hardest admissible stop from `x`: jerk towards full braking, then hold.
pub fn emergency_brake(
    x: KinState<f64>,
    n: usize,
    dt: f64,
    t0: f64,
    slope: &SlopeProfile,
    params: &VehicleParams<f64>,
) -> Trajectory<f64> {
    let lim = &params.limits;
    let mut s = x;
    let mut stopped = x.v <= 0.0;
    let (mut l, mut v, mut a, mut j) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let jk = if stopped { 0.0 } else { ((-lim.a_b_max - s.a) / dt).clamp(-lim.j_max, lim.j_max) };
        l.push(s.l);
        v.push(s.v);
        a.push(s.a);
        j.push(jk);
        if stopped {
            continue;
        }
        let (next, stop) = integrate_state(s, jk, dt);
        s = next;
        stopped = stop;
    }
    let theta = l.iter().map(|p| slope.theta(*p)).collect();
    Trajectory::from_kinematics(dt, t0, l, v, a, j, theta, None, params)
}

/// Number of strict local extrema, ignoring changes below `tol`.
pub fn count_extrema(xs: &[f64], tol: f64) -> usize {
    let mut count = 0;
    let mut dir = 0i8;
    let mut anchor = match xs.first() {
        Some(x) => *x,
        None => return 0,
    };
    for &x in &xs[1..] {
        let d = x - anchor;
        if d.abs() <= tol {
            continue;
        }
        let nd = if d > 0.0 { 1 } else { -1 };
        if dir != 0 && nd != dir {
            count += 1;
        }
        dir = nd;
        anchor = x;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrema() {
        assert_eq!(count_extrema(&[0.0, 1.0, 2.0, 1.0, 0.0, 1.0], 1e-9), 2);
        assert_eq!(count_extrema(&[1.0; 10], 1e-9), 0);
        assert_eq!(count_extrema(&[0.0, 1.0, 1.0 - 1e-12, 2.0], 1e-9), 0);
    }

    #[test]
    fn brake_comes_to_rest() {
        let p = VehicleParams::truck();
        let z = emergency_brake(KinState::new(0.0, 20.0, 0.0), 80, 0.1, 0.0, &SlopeProfile::flat(), &p);
        assert!(limits_ok(&z, &p));
        assert_eq!(*z.v.last().unwrap(), 0.0);
        assert!(z.v.windows(2).all(|w| w[1] <= w[0]));
    }
}
