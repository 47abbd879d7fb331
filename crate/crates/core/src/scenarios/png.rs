//! Cruise control against fuel-optimal refinement on a fixed course.

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::export::{Event, EventKind, PlanSource, Rollout, RunResult, StepRow};
use super::metrics::compute_metrics;
use super::{limits_ok, quintic_traj, regrade};
use crate::dynamics::KinState;
use crate::error::{Error, Result};
use crate::optimizer::{build_problem, solve, ConstraintSpec, IpmOptions, Status};
use crate::polytraj::{evaluate_objective, select_index, Quintic, Weights};
use crate::trajectory::Trajectory;

/// The three runs of the case study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PngOutcome {
    pub cc: RunResult,
    pub emato: RunResult,
    pub energy: RunResult,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Cc,
    Emato,
    Energy,
}

/// Runs cruise control, the refined trajectory and the energy-policy
/// quintic over the same course. Each replanning segment is one horizon
/// whose end distance is pinned, so all three runs finish together.
pub fn run_cc_png(cfg: &ScenarioConfig) -> Result<PngOutcome> {
    cfg.validate()?;
    let pc = &cfg.png;
    let segs = (pc.distance / pc.replan_distance).round() as usize;
    if segs == 0 || !(pc.v_d > 0.0) {
        return Err(Error::InvalidSpec("course must hold at least one segment at positive speed".into()));
    }
    let dur = pc.replan_distance / pc.v_d;
    let steps = (dur / cfg.dt).round() as usize;
    if ((steps as f64) * cfg.dt - dur).abs() > 1e-9 {
        return Err(Error::InvalidSpec(format!("segment time {dur} s is not a multiple of dt")));
    }
    Ok(PngOutcome {
        cc: run_mode(cfg, Mode::Cc, segs, steps)?,
        emato: run_mode(cfg, Mode::Emato, segs, steps)?,
        energy: run_mode(cfg, Mode::Energy, segs, steps)?,
    })
}

fn run_mode(cfg: &ScenarioConfig, mode: Mode, segs: usize, steps: usize) -> Result<RunResult> {
    let params = cfg.params()?;
    let pc = &cfg.png;
    let dt = cfg.dt;
    let n = steps + 1;
    let dur = steps as f64 * dt;
    let mut x = KinState::new(0.0, pc.v_d, 0.0);
    let mut rows: Vec<StepRow> = Vec::new();
    let mut rollouts = Vec::new();
    let mut events = Vec::new();
    let mut times = Vec::new();
    let mut last: Option<Trajectory<f64>> = None;

    for seg in 0..segs {
        let t0 = seg as f64 * dur;
        let end_l = x.l + pc.replan_distance;
        let target = KinState::new(end_l, pc.v_d, 0.0);
        let reference = quintic_traj(&Quintic::fit(x, target, dur)?, n, dt, t0, &cfg.slope, &params);
        let mut rec = Rollout { t0, source: PlanSource::Baseline, status: None, iterations: None, objective: None, fuel_ml: 0.0 };
        let plan = match mode {
            Mode::Cc => reference,
            Mode::Energy => {
                let w = Weights::new(cfg.weights.energy, pc.v_d);
                let k = (pc.speed_spread / pc.speed_step).round() as i64;
                let cands: Vec<Trajectory<f64>> = (-k..=k)
                    .map(|i| {
                        let end = KinState::new(end_l, pc.v_d + i as f64 * pc.speed_step, 0.0);
                        Quintic::fit(x, end, dur).map(|q| quintic_traj(&q, n, dt, t0, &cfg.slope, &params))
                    })
                    .collect::<Result<_>>()?;
                let costs: Vec<Option<f64>> =
                    cands.iter().map(|z| limits_ok(z, &params).then(|| evaluate_objective(z, &w))).collect();
                match select_index(&costs) {
                    Ok(i) => cands[i].clone(),
                    Err(_) => {
                        events.push(Event { t: t0, kind: EventKind::NoFeasibleCandidate, detail: "energy grid empty".into() });
                        rec.source = PlanSource::Fallback;
                        reference
                    }
                }
            }
            Mode::Emato => {
                let w = Weights::new(cfg.weights.png, pc.v_d);
                let prob = build_problem(&reference, &reference.theta, ConstraintSpec::bvp(), w, &params)?;
                let sol = solve(&prob, &IpmOptions::default());
                times.push(sol.stats.wall_time);
                rec.status = Some(sol.stats.status);
                rec.iterations = Some(sol.stats.iterations);
                rec.objective = Some(sol.stats.objective);
                if sol.stats.status != Status::Infeasible {
                    rec.source = PlanSource::Optimized;
                    regrade(&prob.trajectory(&sol.x), &cfg.slope, &params)
                } else {
                    events.push(Event {
                        t: t0,
                        kind: EventKind::SolverFallback,
                        detail: format!(
                            "{:?}, violation {:.2e}: {}",
                            sol.stats.status,
                            sol.stats.max_violation,
                            sol.stats.diagnostic.unwrap_or_default()
                        ),
                    });
                    rec.source = PlanSource::Fallback;
                    reference
                }
            }
        };
        rec.fuel_ml = (0..steps).map(|k| plan.f_r[k] * dt).sum();
        rows.extend((0..steps).map(|k| StepRow::longitudinal(&plan, k)));
        x = KinState::new(plan.l[steps], plan.v[steps], plan.a[steps]);
        rollouts.push(rec);
        last = Some(plan);
    }
    if let Some(p) = &last {
        rows.push(StepRow::longitudinal(p, steps));
    }
    let metrics = compute_metrics(&rows, dt)?;
    let name = match mode {
        Mode::Cc => "cc",
        Mode::Emato => "emato",
        Mode::Energy => "energy-quintic",
    };
    Ok(RunResult {
        scenario: "png".into(),
        algorithm: name.into(),
        dt,
        metrics,
        rollout_fuel_ml: rollouts.iter().map(|r: &Rollout| r.fuel_ml).sum(),
        rollouts,
        events,
        min_separation: None,
        gap: vec![],
        steps: rows,
        solve_times: times,
    })
}
