//! Car following behind a driving-cycle leader.

use std::fmt;
use std::str::FromStr;

use super::config::ScenarioConfig;
use super::cycle::{lead_prediction, DrivingCycle};
use super::export::{Event, EventKind, PlanSource, Rollout, RunResult, StepRow};
use super::metrics::compute_metrics;
use super::{emergency_brake, limits_ok, quintic_traj, regrade};
use crate::dynamics::{integrate_state, KinState};
use crate::error::{Error, Result};
use crate::dynamics::VehicleParams;
use crate::optimizer::{
    acc_constraints, acc_spacing, build_problem, solve, AccVariant, ConstraintSpec, IpmOptions, LeadPrediction, SolveStats,
    Status,
};
use crate::polytraj::{evaluate_objective, select_index, Quintic, Weights};
use crate::trajectory::Trajectory;

/// Extra terminal gaps sampled by the quintic baseline (m).
const GAP_OFFSETS: [f64; 5] = [0.0, 2.5, 5.0, 7.5, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccAlgo {
    Quintic,
    EmatoB,
    EmatoR,
    EmatoV,
}

impl AccAlgo {
    pub const ALL: [AccAlgo; 4] = [AccAlgo::Quintic, AccAlgo::EmatoB, AccAlgo::EmatoR, AccAlgo::EmatoV];

    fn variant(self) -> Option<AccVariant> {
        match self {
            AccAlgo::Quintic => None,
            AccAlgo::EmatoB => Some(AccVariant::B),
            AccAlgo::EmatoR => Some(AccVariant::R),
            AccAlgo::EmatoV => Some(AccVariant::V),
        }
    }
}

impl FromStr for AccAlgo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quintic" => Ok(Self::Quintic),
            "emato-b" => Ok(Self::EmatoB),
            "emato-r" => Ok(Self::EmatoR),
            "emato-v" => Ok(Self::EmatoV),
            _ => Err(Error::InvalidArgument(format!("unknown ACC algorithm '{s}'"))),
        }
    }
}

impl fmt::Display for AccAlgo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Quintic => "quintic",
            Self::EmatoB => "emato-b",
            Self::EmatoR => "emato-r",
            Self::EmatoV => "emato-v",
        })
    }
}

fn gap_ok(z: &Trajectory<f64>, pred: &LeadPrediction, gap_min: f64) -> bool {
    (0..z.len()).all(|k| pred.l[k] - z.l[k] >= gap_min - 1e-9)
}

/// Margin kept inside the minimum-gap bound so that solver bound
/// relaxation never shows up as a gap violation (m).
const GAP_MARGIN: f64 = 1e-3;

/// Share of the acceleration and jerk limits assumed when clipping the
/// corridor to reachable positions.
const REACH_SHARE: f64 = 0.8;

fn describe(stats: &SolveStats) -> String {
    format!(
        "{:?}, violation {:.2e}: {}",
        stats.status,
        stats.max_violation,
        stats.diagnostic.clone().unwrap_or_default()
    )
}

/// Drops the upper gap limit, keeping only the minimum-gap side.
fn relaxed(spec: &ConstraintSpec<f64>) -> ConstraintSpec<f64> {
    let hi = spec.end_l.map_or(f64::INFINITY, |e| e.1);
    ConstraintSpec {
        l_lo: vec![f64::NEG_INFINITY; spec.l_lo.len()],
        end_l: Some((f64::NEG_INFINITY, hi)),
        ..spec.clone()
    }
}

/// Positions reached from `x` by easing into a fraction of the
/// acceleration limit and holding it up to the speed limit.
fn reachable(x: KinState<f64>, n: usize, dt: f64, params: &VehicleParams<f64>) -> Vec<f64> {
    let lim = &params.limits;
    let a_cap = REACH_SHARE * lim.a_v_max.min(lim.a_t_max);
    let mut s = x;
    (0..n)
        .map(|_| {
            let l = s.l;
            let target = if s.v >= lim.v_max - a_cap * dt { 0.0 } else { a_cap };
            let j = ((target - s.a) / dt).clamp(-REACH_SHARE * lim.j_max, REACH_SHARE * lim.j_max);
            s = integrate_state(s, j, dt).0;
            l
        })
        .collect()
}

/// Solves one rollout in coordinates local to `origin`. Returns the plan
/// only when the solver did not report infeasibility.
fn refine(
    warm: &Trajectory<f64>,
    spec: &ConstraintSpec<f64>,
    weights: Weights<f64>,
    params: &VehicleParams<f64>,
    origin: f64,
) -> Result<(Option<Trajectory<f64>>, SolveStats)> {
    let mut local = spec.clone();
    // The far edge of the corridor is clipped to what the ego can still reach.
    let reach = reachable(KinState::new(0.0, warm.v[0], warm.a[0]), warm.len(), warm.dt, params);
    local.l_lo.iter_mut().zip(&reach).for_each(|(l, r)| *l = (*l - origin).min(*r));
    // The margin never pushes the bound behind the start, which a vehicle
    // at rest could not honour.
    local.l_hi.iter_mut().for_each(|l| {
        let h = *l - origin;
        *l = (h - GAP_MARGIN).max(h.min(0.0));
    });
    if let Some((lo, hi)) = local.end_l {
        let cap = local.l_hi.last().copied().unwrap_or(f64::INFINITY);
        let hi = (hi - origin).min(cap);
        let far = reach.last().copied().unwrap_or(f64::INFINITY);
        local.end_l = Some(((lo - origin).min(far).min(hi), hi));
    }
    let warm = warm.shifted(-origin);
    let prob = build_problem(&warm, &warm.theta, local, weights, params)?;
    let sol = solve(&prob, &IpmOptions::default());
    let z = (sol.stats.status != Status::Infeasible).then(|| prob.trajectory(&sol.x).shifted(origin));
    Ok((z, sol.stats))
}

/// Follows the cycle leader, replanning every `cfg.replan` seconds until
/// the cycle or the distance budget runs out.
pub fn run_acc(cfg: &ScenarioConfig, cycle: &DrivingCycle) -> Result<RunResult> {
    cfg.validate()?;
    let algo: AccAlgo = cfg.algorithm.parse()?;
    let params = cfg.params()?;
    let acc = &cfg.acc;
    let (n, dt, exec) = (cfg.n_t(), cfg.dt, cfg.replan_steps());
    let dur = (n - 1) as f64 * dt;
    let budget = cfg.distance_budget.unwrap_or(f64::INFINITY);

    let v0 = cycle.speed_at(0.0);
    let lead0 = acc_spacing(v0, acc.t_h, acc.gap_min);
    let lead_l = |t: f64| lead0 + cycle.distance_at(t);
    let mut x = KinState::new(0.0, v0, 0.0);

    let mut rows = Vec::new();
    let mut gap = Vec::new();
    let mut rollouts = Vec::new();
    let mut events = Vec::new();
    let mut times = Vec::new();
    let mut min_gap = f64::INFINITY;
    let mut t0 = 0.0;
    let mut last: Option<Trajectory<f64>> = None;

    loop {
        if x.l >= budget {
            break;
        }
        if t0 + exec as f64 * dt > cycle.duration() + 1e-9 {
            events.push(Event {
                t: t0,
                kind: EventKind::CycleExhausted,
                detail: format!("stopped at {:.1} m of a {budget} m budget", x.l),
            });
            break;
        }
        let pred = lead_prediction(cycle, t0, lead_l(t0), n, dt)?;
        let (lt, vt) = (pred.l[n - 1], pred.v[n - 1]);
        let d_acc = acc_spacing(vt, acc.t_h, acc.gap_min);

        // Quintic baseline candidates over terminal gaps.
        let cands: Vec<Trajectory<f64>> = GAP_OFFSETS
            .iter()
            .map(|off| {
                let end = KinState::new(lt - d_acc - off, vt, 0.0);
                Quintic::fit(x, end, dur).map(|q| quintic_traj(&q, n, dt, t0, &cfg.slope, &params))
            })
            .collect::<Result<_>>()?;
        let energy = Weights::new(cfg.weights.energy, vt);
        let costs: Vec<Option<f64>> = cands
            .iter()
            .map(|z| (limits_ok(z, &params) && gap_ok(z, &pred, acc.gap_min)).then(|| evaluate_objective(z, &energy)))
            .collect();
        let baseline = select_index(&costs).ok().map(|i| cands[i].clone());

        let mut rec = Rollout { t0, source: PlanSource::Baseline, status: None, iterations: None, objective: None, fuel_ml: 0.0 };
        let mut plan = baseline.clone();
        if let Some(variant) = algo.variant() {
            let mut w = cfg.weights.emato;
            if variant == AccVariant::V {
                w[0] = cfg.weights.emato_v_tracking;
            }
            let weights = Weights::new(w, vt);
            let spec = acc_constraints(variant, &pred, acc)?;
            let (z, stats) = refine(&cands[0], &spec, weights, &params, x.l)?;
            times.push(stats.wall_time);
            rec.status = Some(stats.status);
            rec.iterations = Some(stats.iterations);
            rec.objective = Some(stats.objective);
            if let Some(z) = z {
                rec.source = PlanSource::Optimized;
                plan = Some(regrade(&z, &cfg.slope, &params));
            } else {
                events.push(Event { t: t0, kind: EventKind::SolverFallback, detail: describe(&stats) });
                rec.source = PlanSource::Fallback;
                if plan.is_none() {
                    // Keep only the safety side of the corridor.
                    let (z, stats) = refine(&cands[0], &relaxed(&spec), weights, &params, x.l)?;
                    times.push(stats.wall_time);
                    if let Some(z) = z {
                        events.push(Event { t: t0, kind: EventKind::CorridorRelaxed, detail: "upper gap limit dropped".into() });
                        plan = Some(regrade(&z, &cfg.slope, &params));
                    }
                }
            }
        }
        let plan = match plan {
            Some(p) => p,
            None => {
                events.push(Event { t: t0, kind: EventKind::EmergencyBrake, detail: "no admissible plan".into() });
                rec.source = PlanSource::EmergencyBrake;
                emergency_brake(x, n, dt, t0, &cfg.slope, &params)
            }
        };

        for k in 0..exec {
            let g = pred.l[k] - plan.l[k];
            min_gap = min_gap.min(g);
            if g < acc.gap_min - 1e-6 {
                events.push(Event {
                    t: plan.t[k],
                    kind: EventKind::SafetyViolation,
                    detail: format!("gap {g:.3} m below {}", acc.gap_min),
                });
            }
            gap.push((plan.t[k], g));
            rows.push(StepRow::longitudinal(&plan, k));
        }
        rec.fuel_ml = (0..exec).map(|k| plan.f_r[k] * dt).sum();
        rollouts.push(rec);
        x = KinState::new(plan.l[exec], plan.v[exec], plan.a[exec]);
        t0 += exec as f64 * dt;
        last = Some(plan);
    }
    if let Some(p) = &last {
        rows.push(StepRow::longitudinal(p, exec));
    }
    let metrics = compute_metrics(&rows, dt)?;
    Ok(RunResult {
        scenario: "acc".into(),
        algorithm: algo.to_string(),
        dt,
        metrics,
        rollout_fuel_ml: rollouts.iter().map(|r: &Rollout| r.fuel_ml).sum(),
        rollouts,
        events,
        min_separation: Some(min_gap),
        gap,
        steps: rows,
        solve_times: times,
    })
}
