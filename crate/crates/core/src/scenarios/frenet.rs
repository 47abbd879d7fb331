//! Multi-lane Frenet planning with optional homotopic refinement.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use super::emergency_brake;
use super::export::{Event, EventKind, PlanSource, Rollout, RunResult, StepRow};
use super::metrics::compute_metrics;
use super::safety::homotopy_safety_check;
use crate::dynamics::{KinState, SlopeProfile, VehicleParams};
use crate::error::{Error, Result};
use crate::optimizer::{build_problem, solve, ConstraintSpec, IpmOptions, Status};
use crate::polytraj::feasibility::clearance;
use crate::polytraj::frenet::frenet_kinematics;
use crate::polytraj::{
    build_candidate, evaluate_objective, feasibility_check, select_index, speed_grid_ends, AgentPrediction,
    FrenetCandidate, GlobalPose, PathMap, Quintic, ReferenceLine, Weights,
};
use crate::trajectory::Trajectory;

/// Clearance added to projected obstacle windows (m).
const WINDOW_MARGIN: f64 = 0.1;
/// Dense samples per step used to project agents onto a path.
const PROJ_SUB: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrenetAlgo {
    QfV,
    QfM,
    QfE,
    EmatoFv,
    EmatoFm,
    EmatoFe,
}

impl FrenetAlgo {
    pub const ALL: [FrenetAlgo; 6] = [
        FrenetAlgo::QfV,
        FrenetAlgo::QfM,
        FrenetAlgo::QfE,
        FrenetAlgo::EmatoFv,
        FrenetAlgo::EmatoFm,
        FrenetAlgo::EmatoFe,
    ];

    pub fn refines(self) -> bool {
        matches!(self, FrenetAlgo::EmatoFv | FrenetAlgo::EmatoFm | FrenetAlgo::EmatoFe)
    }

    /// The quintic policy an algorithm selects candidates with.
    pub fn baseline(self) -> FrenetAlgo {
        match self {
            FrenetAlgo::EmatoFv => FrenetAlgo::QfV,
            FrenetAlgo::EmatoFm => FrenetAlgo::QfM,
            FrenetAlgo::EmatoFe => FrenetAlgo::QfE,
            other => other,
        }
    }
}

impl FromStr for FrenetAlgo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "qf-v" => Self::QfV,
            "qf-m" => Self::QfM,
            "qf-e" => Self::QfE,
            "emato-fv" => Self::EmatoFv,
            "emato-fm" => Self::EmatoFm,
            "emato-fe" => Self::EmatoFe,
            _ => return Err(Error::InvalidArgument(format!("unknown Frenet algorithm '{s}'"))),
        })
    }
}

impl fmt::Display for FrenetAlgo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::QfV => "qf-v",
            Self::QfM => "qf-m",
            Self::QfE => "qf-e",
            Self::EmatoFv => "emato-fv",
            Self::EmatoFm => "emato-fm",
            Self::EmatoFe => "emato-fe",
        })
    }
}

/// Constant-speed traffic participant on a lane centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agent {
    pub s0: f64,
    pub d: f64,
    pub v: f64,
}

/// Lane traffic from the config. Seed 0 gives the nominal layout; other
/// seeds shift each vehicle by up to a quarter of the spacing.
pub fn traffic(cfg: &ScenarioConfig) -> Vec<Agent> {
    let f = &cfg.frenet;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = 0.25 * f.vehicle_gap;
    let mut out = Vec::new();
    for (lane, &d) in f.lane_offsets.iter().enumerate() {
        for i in 0..f.vehicles_per_lane {
            let mut s0 = f.first_vehicle_s[lane] + i as f64 * f.vehicle_gap;
            if cfg.seed != 0 {
                s0 += rng.gen_range(-jitter..jitter);
            }
            out.push(Agent { s0, d, v: f.lane_speeds_kmh[lane] / 3.6 });
        }
    }
    out
}

/// Constant-velocity predictions over `n` steps from `t0`.
pub fn predict(agents: &[Agent], reference: &ReferenceLine, t0: f64, n: usize, dt: f64) -> Vec<AgentPrediction> {
    agents
        .iter()
        .map(|a| AgentPrediction {
            positions: (0..n)
                .map(|k| {
                    let f = reference.frame_unchecked(a.s0 + a.v * (t0 + k as f64 * dt));
                    [f.pos[0] + a.d * f.normal[0], f.pos[1] + a.d * f.normal[1]]
                })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct FrenetState {
    s: KinState<f64>,
    d: KinState<f64>,
}

/// A fully sampled plan: rows with path coordinate from the plan start, and
/// the Frenet state at every sample.
#[derive(Debug, Clone)]
struct Plan {
    rows: Vec<StepRow>,
    states: Vec<FrenetState>,
}

impl Plan {
    fn from_candidate(c: &FrenetCandidate, dt: f64) -> Self {
        let n = c.path.len();
        let rows = (0..n).map(|k| StepRow::planar(&c.path, k, &c.poses[k], c.s[k], c.d[k])).collect();
        let states = (0..n)
            .map(|k| FrenetState { s: c.s_seg.state(k as f64 * dt), d: c.d_seg.state(k as f64 * dt) })
            .collect();
        Self { rows, states }
    }

    fn braking(x: FrenetState, reference: &ReferenceLine, n: usize, dt: f64, t0: f64, slope: &SlopeProfile, params: &VehicleParams<f64>) -> Self {
        let z = emergency_brake(KinState::new(0.0, x.s.v, x.s.a), n, dt, t0, &SlopeProfile::flat(), params);
        let mut rows = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        let d = KinState::new(x.d.l, 0.0, 0.0);
        let theta: Vec<f64> = z.l.iter().map(|l| slope.theta(x.s.l + l)).collect();
        let z = Trajectory::from_kinematics(dt, t0, z.l.clone(), z.v.clone(), z.a.clone(), z.j.clone(), theta, None, params);
        for k in 0..n {
            let s = x.s.l + z.l[k];
            let f = reference.frame_unchecked(s);
            let pose = GlobalPose {
                x: f.pos[0] + d.l * f.normal[0],
                y: f.pos[1] + d.l * f.normal[1],
                yaw: f.heading,
                curvature: f.curvature,
                speed: z.v[k],
            };
            rows.push(StepRow::planar(&z, k, &pose, s, d.l));
            states.push(FrenetState { s: KinState::new(s, z.v[k], z.a[k]), d });
        }
        Self { rows, states }
    }
}

/// Pose on a path at parameter `tau`, moving at speed `v` along it.
fn pose_at(map: &PathMap<'_>, tau: f64, v: f64) -> GlobalPose {
    const H: f64 = 1e-4;
    let (p, d1) = frenet_kinematics(map.s_seg, map.d_seg, map.reference, tau);
    let (_, vp) = frenet_kinematics(map.s_seg, map.d_seg, map.reference, tau + H);
    let (_, vm) = frenet_kinematics(map.s_seg, map.d_seg, map.reference, tau - H);
    let d2 = [(vp[0] - vm[0]) / (2.0 * H), (vp[1] - vm[1]) / (2.0 * H)];
    let g = (d1[0] * d1[0] + d1[1] * d1[1]).sqrt();
    let curvature = if g > 1e-6 { (d1[0] * d2[1] - d1[1] * d2[0]) / (g * g * g) } else { 0.0 };
    GlobalPose { x: p[0], y: p[1], yaw: d1[1].atan2(d1[0]), curvature, speed: v }
}

/// Path-coordinate windows that keep every projected agent `r_safe` away,
/// on the side the reference passes it.
fn obstacle_windows(
    map: &PathMap<'_>,
    reference: &Trajectory<f64>,
    preds: &[AgentPrediction],
    r_safe: f64,
    dt: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = reference.len();
    let h = dt / PROJ_SUB as f64;
    let m = (n - 1) * PROJ_SUB + 1;
    let pts: Vec<[f64; 2]> = (0..m).map(|i| map.position(i as f64 * h)).collect();
    let mut ls = vec![0.0; m];
    for i in 1..m {
        ls[i] = ls[i - 1] + map.arclength((i - 1) as f64 * h, i as f64 * h);
    }
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    for a in preds {
        for k in 0..n {
            let q = a.positions[k];
            let i = (0..m)
                .min_by(|&i, &j| {
                    let di = (pts[i][0] - q[0]).powi(2) + (pts[i][1] - q[1]).powi(2);
                    let dj = (pts[j][0] - q[0]).powi(2) + (pts[j][1] - q[1]).powi(2);
                    di.total_cmp(&dj)
                })
                .unwrap_or(0);
            let (i0, i1) = if i + 1 < m { (i, i + 1) } else { (i - 1, i) };
            let t = [pts[i1][0] - pts[i0][0], pts[i1][1] - pts[i0][1]];
            let tn = (t[0] * t[0] + t[1] * t[1]).sqrt().max(1e-12);
            let t = [t[0] / tn, t[1] / tn];
            let e = [q[0] - pts[i][0], q[1] - pts[i][1]];
            let along = ls[i] + e[0] * t[0] + e[1] * t[1];
            let lat = (e[0] * t[1] - e[1] * t[0]).abs();
            if lat >= r_safe {
                continue;
            }
            let half = (r_safe * r_safe - lat * lat).sqrt() + WINDOW_MARGIN;
            if reference.l[k] <= along {
                hi[k] = hi[k].min(along - half);
            } else {
                lo[k] = lo[k].max(along + half);
            }
        }
    }
    (lo, hi)
}

/// Maps a refined path-coordinate trajectory back onto the candidate path.
fn refined_plan(
    c: &FrenetCandidate,
    reference: &ReferenceLine,
    z: &Trajectory<f64>,
    slope: &SlopeProfile,
    params: &VehicleParams<f64>,
    dt: f64,
) -> Plan {
    let map = PathMap { s_seg: &c.s_seg, d_seg: &c.d_seg, reference };
    let n = z.len();
    let cum = map.cumulative(n, dt);
    let taus: Vec<f64> = z.l.iter().map(|&l| map.tau_at(l, &cum, dt)).collect();
    let theta = taus.iter().map(|&tau| slope.theta(c.s_seg.pos(tau))).collect();
    let t0 = z.t[0];
    let z = Trajectory::from_kinematics(dt, t0, z.l.clone(), z.v.clone(), z.a.clone(), z.j.clone(), theta, Some(z.a_b.clone()), params);
    let mut rows = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for (k, &tau) in taus.iter().enumerate() {
        let (sigma, dsigma, _) = map.rates(tau);
        let td = z.v[k] / sigma;
        let tdd = (z.a[k] - dsigma * td * td) / sigma;
        let lift = |q: &Quintic<f64>| {
            KinState::new(q.pos(tau), q.vel(tau) * td, q.acc(tau) * td * td + q.vel(tau) * tdd)
        };
        let st = FrenetState { s: lift(&c.s_seg), d: lift(&c.d_seg) };
        rows.push(StepRow::planar(&z, k, &pose_at(&map, tau, z.v[k]), st.s.l, st.d.l));
        states.push(st);
    }
    Plan { rows, states }
}

fn positions(rows: &[StepRow]) -> Vec<[f64; 2]> {
    rows.iter().map(|r| [r.x, r.y]).collect()
}

/// Drives the ego through lane traffic until it reaches `cfg.frenet.distance`
/// on the road coordinate.
pub fn run_frenet(cfg: &ScenarioConfig) -> Result<RunResult> {
    cfg.validate()?;
    let algo: FrenetAlgo = cfg.algorithm.parse()?;
    let fc = &cfg.frenet;
    let params = cfg.params()?;
    let geo = fc.geometry;
    let (n, dt, exec) = (cfg.n_t(), cfg.dt, cfg.replan_steps());
    let dur = (n - 1) as f64 * dt;
    let reference = ReferenceLine::straight(fc.road_length, fc.lane_offsets.clone());
    let agents = traffic(cfg);
    let policy = match algo.baseline() {
        FrenetAlgo::QfV => cfg.weights.qf_v,
        FrenetAlgo::QfM => cfg.weights.qf_m,
        _ => cfg.weights.qf_e,
    };
    let select_w = Weights::new(policy, fc.v_d);
    let refine_w = Weights::new(cfg.weights.emato, fc.v_d);

    let mut x = FrenetState {
        s: KinState::new(0.0, fc.ego_speed, 0.0),
        d: KinState::new(fc.lane_offsets[fc.ego_lane], 0.0, 0.0),
    };
    let mut l_total = 0.0;
    let mut t0 = 0.0;
    let mut rows = Vec::new();
    let mut rollouts = Vec::new();
    let mut events = Vec::new();
    let mut times = Vec::new();
    let mut min_sep = f64::INFINITY;
    let mut prev: Option<(Plan, usize)> = None;
    let mut last_row: Option<StepRow> = None;

    while x.s.l < fc.distance {
        let preds = predict(&agents, &reference, t0, n, dt);
        let mut cands = Vec::new();
        for (lane, &d_end) in fc.lane_offsets.iter().enumerate() {
            for off in &fc.speed_offsets {
                let v_t = fc.v_d + off;
                let s_end = speed_grid_ends(x.s, &[v_t], dur)[0];
                let s_seg = Quintic::fit(x.s, s_end, dur)?;
                let d_seg = Quintic::fit(x.d, KinState::new(d_end, 0.0, 0.0), dur)?;
                if let Ok(mut c) = build_candidate(s_seg, d_seg, lane, v_t, &reference, &cfg.slope, &params, n, dt, t0) {
                    c.verdict = feasibility_check(&c.poses, &c.path, &params, &preds, &geo)?;
                    cands.push(c);
                }
            }
        }
        let costs: Vec<Option<f64>> =
            cands.iter().map(|c| c.verdict.is_feasible().then(|| evaluate_objective(&c.path, &select_w))).collect();

        let mut rec = Rollout { t0, source: PlanSource::Baseline, status: None, iterations: None, objective: None, fuel_ml: 0.0 };
        let (plan, offset) = match select_index(&costs) {
            Ok(i) => {
                let c = &cands[i];
                let base = Plan::from_candidate(c, dt);
                if !algo.refines() {
                    (base, 0)
                } else {
                    let map = PathMap { s_seg: &c.s_seg, d_seg: &c.d_seg, reference: &reference };
                    let (lo, hi) = obstacle_windows(&map, &c.path, &preds, geo.r_safe, dt);
                    let spec = ConstraintSpec::frenet_homotopy(lo, hi);
                    let prob = build_problem(&c.path, &c.path.theta, spec, refine_w, &params)?;
                    let sol = solve(&prob, &IpmOptions::default());
                    times.push(sol.stats.wall_time);
                    rec.status = Some(sol.stats.status);
                    rec.iterations = Some(sol.stats.iterations);
                    rec.objective = Some(sol.stats.objective);
                    if sol.stats.status == Status::Infeasible {
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
                        (base, 0)
                    } else {
                        let opt = refined_plan(c, &reference, &prob.trajectory(&sol.x), &cfg.slope, &params, dt);
                        let verdict = homotopy_safety_check(&positions(&opt.rows), &positions(&base.rows), &preds, geo.r_safe);
                        let poses: Vec<GlobalPose> = opt
                            .rows
                            .iter()
                            .map(|r| GlobalPose { x: r.x, y: r.y, yaw: r.yaw, curvature: 0.0, speed: r.v })
                            .collect();
                        let z = rows_trajectory(&opt.rows, dt, &params);
                        let recheck = feasibility_check(&poses, &z, &params, &preds, &geo)?;
                        if verdict.accepted() && recheck.is_feasible() {
                            rec.source = PlanSource::Optimized;
                            (opt, 0)
                        } else {
                            events.push(Event {
                                t: t0,
                                kind: EventKind::HomotopyReject,
                                detail: format!("xi {:.3} m, recheck {:?}", verdict.xi(), recheck),
                            });
                            rec.source = PlanSource::Fallback;
                            (base, 0)
                        }
                    }
                }
            }
            Err(_) => {
                events.push(Event { t: t0, kind: EventKind::NoFeasibleCandidate, detail: format!("{} candidates", cands.len()) });
                match prev.take() {
                    Some((p, o)) if o + exec < p.rows.len() => {
                        rec.source = PlanSource::PreviousTail;
                        (p, o)
                    }
                    _ => {
                        events.push(Event { t: t0, kind: EventKind::EmergencyBrake, detail: "no tail left".into() });
                        rec.source = PlanSource::EmergencyBrake;
                        (Plan::braking(x, &reference, n, dt, t0, &cfg.slope, &params), 0)
                    }
                }
            }
        };

        let l_base = plan.rows[offset].l;
        for k in 0..exec {
            let mut r = plan.rows[offset + k];
            let c = clearance([r.x, r.y], &preds, k);
            min_sep = min_sep.min(c);
            if c < geo.r_safe - 1e-6 {
                events.push(Event { t: r.t, kind: EventKind::SafetyViolation, detail: format!("clearance {c:.3} m") });
            }
            rec.fuel_ml += r.f_r * dt;
            r.l = l_total + r.l - l_base;
            rows.push(r);
        }
        let mut end = plan.rows[offset + exec];
        end.l = l_total + end.l - l_base;
        l_total = end.l;
        last_row = Some(end);
        x = plan.states[offset + exec];
        rollouts.push(rec);
        t0 += exec as f64 * dt;
        prev = Some((plan, offset + exec));
    }
    rows.extend(last_row);
    let metrics = compute_metrics(&rows, dt)?;
    Ok(RunResult {
        scenario: "frenet".into(),
        algorithm: algo.to_string(),
        dt,
        metrics,
        rollout_fuel_ml: rollouts.iter().map(|r: &Rollout| r.fuel_ml).sum(),
        rollouts,
        events,
        min_separation: Some(min_sep),
        gap: vec![],
        steps: rows,
        solve_times: times,
    })
}

/// Path-coordinate view of sampled rows, for re-checking limits.
fn rows_trajectory(rows: &[StepRow], dt: f64, params: &VehicleParams<f64>) -> Trajectory<f64> {
    Trajectory::from_kinematics(
        dt,
        rows[0].t,
        rows.iter().map(|r| r.l).collect(),
        rows.iter().map(|r| r.v).collect(),
        rows.iter().map(|r| r.a_v).collect(),
        rows.iter().map(|r| r.j).collect(),
        rows.iter().map(|r| r.theta).collect(),
        Some(rows.iter().map(|r| r.a_b).collect()),
        params,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for a in FrenetAlgo::ALL {
            assert_eq!(a.to_string().parse::<FrenetAlgo>().unwrap(), a);
        }
        assert!("qf-x".parse::<FrenetAlgo>().is_err());
    }

    #[test]
    fn nominal_layout() {
        let t = traffic(&ScenarioConfig::default());
        assert_eq!(t.len(), 6);
        assert_eq!(t[0].s0, 60.0);
        assert_eq!(t[1].s0, 180.0);
        assert!((t[5].v - 60.0 / 3.6).abs() < 1e-12);
        let jittered = traffic(&ScenarioConfig { seed: 7, ..Default::default() });
        assert_ne!(jittered[0].s0, 60.0);
        assert_eq!(traffic(&ScenarioConfig { seed: 7, ..Default::default() }), jittered);
    }

    #[test]
    fn windows_bracket_reference() {
        let r = ReferenceLine::straight(1000.0, vec![0.0]);
        let s = Quintic::fit(KinState::new(0.0, 15.0, 0.0), KinState::new(73.5, 15.0, 0.0), 4.9).unwrap();
        let d = Quintic::fit(KinState::new(0.0, 0.0, 0.0), KinState::new(0.0, 0.0, 0.0), 4.9).unwrap();
        let map = PathMap { s_seg: &s, d_seg: &d, reference: &r };
        let c = build_candidate(s, d, 0, 15.0, &r, &SlopeProfile::flat(), &VehicleParams::truck(), 50, 0.1, 0.0).unwrap();
        let ahead = predict(&[Agent { s0: 20.0, d: 1.0, v: 15.0 }], &r, 0.0, 50, 0.1);
        let (lo, hi) = obstacle_windows(&map, &c.path, &ahead, 3.0, 0.1);
        let half = (9.0f64 - 1.0).sqrt() + WINDOW_MARGIN;
        for k in 0..50 {
            assert_eq!(lo[k], f64::NEG_INFINITY);
            let expect = 20.0 + 1.5 * k as f64 - half;
            assert!((hi[k] - expect).abs() < 1e-6, "{k}: {} vs {expect}", hi[k]);
            assert!(c.path.l[k] <= hi[k]);
        }
    }
}
