//! The acceptance suite: one verdict per criterion, with the thresholds and
//! runtime budgets pinned here.

use std::time::{Duration, Instant};

use emato::dynamics::SlopeProfile;
use emato::powertrain::fit::synthesize_samples;
use emato::powertrain::{fit_fuel_model, FuelCoeffs, MapSpec};
use emato::scenarios::{count_extrema, run_acc, run_frenet, FuelModel, RunResult, ScenarioConfig, VehicleKind};

use crate::check;
use crate::fit::fit_map;
use crate::run::{run_png, EXTREMA_TOL};
use crate::{CliError, CliResult};

pub const FIT_ACCURACY_MIN: f64 = 95.0;
pub const RECOVERY_TOL: f64 = 1e-6;
pub const PNG_MIN_EXTREMA: usize = 3;
/// Relative slack for "CC at or below the energy quintic".
pub const PNG_CC_SLACK: f64 = 0.01;
pub const PNG_DISTANCE_TOL: f64 = 1e-6;
pub const ACC_GAIN_MIN: f64 = 1.02;
pub const ORDER_SLACK: f64 = 0.01;
pub const FRENET_GAIN_MIN: f64 = 1.10;
pub const JERK_RATIO_MIN: f64 = 10.0;
pub const SOLVE_MEAN_MAX: f64 = 0.1;
pub const GAP_TOL: f64 = 1e-6;

pub const ABLATION: [(&str, [f64; 5]); 4] = [
    ("jerk", [0.0, 0.0, 0.0, 1.16, 0.0]),
    ("general", [0.0, 9.51, 9.51, 1.16, 0.0]),
    ("efficiency", [0.0, 0.0, 0.0, 0.0, 1.0]),
    ("holistic", [0.0, 9.51, 9.51, 1.16, 38.91]),
];

#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} [{:>2}] {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Scenario settings shared by the closed-loop criteria: truck on flat
/// ground with the synthetic-map fuel fit.
pub fn scenario_config(algo: &str) -> ScenarioConfig {
    ScenarioConfig { algorithm: algo.into(), fuel: FuelModel::SyntheticFit, ..Default::default() }
}

fn acc(algo: &str, slope: SlopeProfile, weights: Option<[f64; 5]>) -> CliResult<RunResult> {
    let mut cfg = scenario_config(algo);
    cfg.slope = slope;
    if let Some(w) = weights {
        cfg.weights.emato = w;
    }
    let cycle = cfg.cycle.load().map_err(CliError::config)?;
    run_acc(&cfg, &cycle).map_err(CliError::from_run)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn within(elapsed: Duration, secs: f64) -> (bool, String) {
    let ok = elapsed.as_secs_f64() < secs;
    (ok, if ok { String::new() } else { format!("; over the {secs} s budget") })
}

fn verdict(id: u8, title: &'static str, elapsed: Duration, budget: f64, r: CliResult<(bool, String)>) -> Verdict {
    let (in_time, note) = within(elapsed, budget);
    match r {
        Ok((ok, detail)) => Verdict { id, title, passed: ok && in_time, detail: detail + &note, elapsed },
        Err(e) => Verdict { id, title, passed: false, detail: e.to_string(), elapsed },
    }
}

pub fn fuel_fit() -> Verdict {
    let (r, el) = timed(|| fit_map(VehicleKind::Truck, &MapSpec::truck()));
    let r = r.map(|f| {
        let acc = f.holdout_accuracy.unwrap_or(0.0);
        (acc >= FIT_ACCURACY_MIN, format!("holdout accuracy {acc:.2}% on {} cells (min {FIT_ACCURACY_MIN}%)", f.n_test))
    });
    verdict(1, "fuel-model fit", el, 5.0, r)
}

pub fn exact_recovery() -> Verdict {
    let (r, el) = timed(|| {
        let truth = FuelCoeffs::<f64>::truck();
        let v: Vec<f64> = (0..=27).map(f64::from).collect();
        let a: Vec<f64> = (0..=30).map(|i| f64::from(i) * 0.1).collect();
        let fit = fit_fuel_model(&synthesize_samples(&truth, &v, &a), truth.rho_g).map_err(CliError::from_run)?;
        let worst = fit
            .coeffs
            .o
            .iter()
            .chain(&fit.coeffs.c)
            .zip(truth.o.iter().chain(&truth.c))
            .map(|(g, w)| (g - w).abs() / w.abs())
            .fold(0.0, f64::max);
        Ok((worst <= RECOVERY_TOL, format!("worst relative coefficient error {worst:.2e} (max {RECOVERY_TOL:.0e})")))
    });
    verdict(2, "exact recovery", el, 1.0, r)
}

pub fn gradient_oracle() -> Verdict {
    let (r, el) = timed(|| check::gradients(5));
    let r = r.map(|c| (c.passed, format!("{} problems, worst relative error {:.2e} (max {:.0e})", c.cases, c.worst, c.threshold)));
    verdict(3, "gradient oracle", el, 30.0, r)
}

fn png_metrics() -> CliResult<Vec<RunResult>> {
    run_png(&scenario_config("png"))
}

pub fn png_reproduction() -> Verdict {
    let (r, el) = timed(|| {
        let runs = png_metrics()?;
        let (cc, emato, energy) = (&runs[0], &runs[1], &runs[2]);
        let v: Vec<f64> = emato.steps.iter().map(|s| s.v).collect();
        let ext = count_extrema(&v, EXTREMA_TOL);
        let (fc, fe, fq) = (cc.metrics.fuel_ml, emato.metrics.fuel_ml, energy.metrics.fuel_ml);
        let same = [emato, energy].iter().all(|r| (r.metrics.distance - cc.metrics.distance).abs() <= PNG_DISTANCE_TOL);
        let ok = fe < fc && fc <= fq * (1.0 + PNG_CC_SLACK) && same && ext >= PNG_MIN_EXTREMA;
        Ok((
            ok,
            format!(
                "fuel emato {fe:.3} < cc {fc:.3} <= energy-quintic {fq:.3} mL, distance {:.1} m on all runs: {same}, {ext} speed extrema (min {PNG_MIN_EXTREMA})",
                cc.metrics.distance
            ),
        ))
    });
    verdict(4, "PnG reproduction", el, 60.0, r)
}

/// Outcome of the ACC runs, shared by criteria 5, 8 and 9.
pub struct AccMatrix {
    pub flat: Vec<(String, RunResult)>,
    pub rolling_b: RunResult,
    pub steep_b: RunResult,
    pub elapsed: Duration,
}

pub fn acc_matrix() -> CliResult<AccMatrix> {
    let t = Instant::now();
    let mut flat = Vec::new();
    for algo in ["quintic", "emato-b", "emato-r", "emato-v"] {
        flat.push((algo.to_string(), acc(algo, SlopeProfile::flat(), None)?));
    }
    let rolling_b = acc("emato-b", SlopeProfile::rolling(), None)?;
    let steep_b = acc("emato-b", SlopeProfile::steep(), None)?;
    Ok(AccMatrix { flat, rolling_b, steep_b, elapsed: t.elapsed() })
}

fn mpg_of(m: &AccMatrix, algo: &str) -> f64 {
    m.flat.iter().find(|(a, _)| a == algo).map_or(f64::NAN, |(_, r)| r.metrics.mpg)
}

pub fn acc_improvement(m: &CliResult<AccMatrix>) -> Verdict {
    let el = m.as_ref().map_or(Duration::ZERO, |m| m.elapsed);
    let r = m.as_ref().map_err(|e| CliError::Runtime(e.to_string())).map(|m| {
        let (q, b, r, v) = (mpg_of(m, "quintic"), mpg_of(m, "emato-b"), mpg_of(m, "emato-r"), mpg_of(m, "emato-v"));
        let gain = b >= q * ACC_GAIN_MIN;
        let order = v >= r * (1.0 - ORDER_SLACK) && r >= b * (1.0 - ORDER_SLACK);
        let gap_min = scenario_config("quintic").acc.gap_min;
        let min_gap = m.flat.iter().filter_map(|(_, r)| r.min_separation).fold(f64::INFINITY, f64::min);
        let violations: usize = m.flat.iter().map(|(_, r)| r.collisions()).sum();
        let safe = min_gap >= gap_min - GAP_TOL && violations == 0;
        (
            gain && order && safe,
            format!(
                "mpg quintic {q:.3}, B {b:.3} ({:+.2}%, min +{:.0}%), R {r:.3}, V {v:.3}; order V>=R>=B within {:.0}%: {order}; min gap {min_gap:.2} m (min {gap_min})",
                100.0 * (b / q - 1.0),
                100.0 * (ACC_GAIN_MIN - 1.0),
                100.0 * ORDER_SLACK
            ),
        )
    });
    verdict(5, "ACC improvement", el, 600.0, r)
}

pub fn frenet_improvement() -> Verdict {
    let (r, el) = timed(|| {
        let mut runs = Vec::new();
        for algo in ["qf-v", "qf-m", "qf-e", "emato-fv", "emato-fm", "emato-fe"] {
            runs.push((algo, run_frenet(&scenario_config(algo)).map_err(CliError::from_run)?));
        }
        let mpg = |a: &str| runs.iter().find(|(x, _)| *x == a).map_or(f64::NAN, |(_, r)| r.metrics.mpg);
        let collisions: usize = runs.iter().map(|(_, r)| r.collisions()).sum();
        let (qm, em) = (mpg("qf-m"), mpg("emato-fm"));
        let gain = em >= qm * FRENET_GAIN_MIN;
        Ok((
            gain && collisions == 0,
            format!(
                "mpg QF-M {qm:.3}, EMATO-FM {em:.3} ({:+.2}%, min +{:.0}%); six runs complete, {collisions} collisions",
                100.0 * (em / qm - 1.0),
                100.0 * (FRENET_GAIN_MIN - 1.0)
            ),
        ))
    });
    verdict(6, "Frenet improvement", el, 600.0, r)
}

pub fn ablation() -> Verdict {
    let (r, el) = timed(|| {
        let mut runs = Vec::new();
        for (name, w) in ABLATION {
            runs.push((name, acc("emato-r", SlopeProfile::flat(), Some(w))?));
        }
        let get = |n: &str| &runs.iter().find(|(x, _)| *x == n).expect("ablation run").1.metrics;
        let (j, g, e, h) = (get("jerk"), get("general"), get("efficiency"), get("holistic"));
        let ratio = e.mean_sq_jerk / h.mean_sq_jerk;
        let ok = h.mpg >= g.mpg && g.mpg >= j.mpg && ratio >= JERK_RATIO_MIN;
        Ok((
            ok,
            format!(
                "mpg holistic {:.3} >= general {:.3} >= jerk {:.3}; mean sq jerk efficiency/holistic {ratio:.1}x (min {JERK_RATIO_MIN}x)",
                h.mpg, g.mpg, j.mpg
            ),
        ))
    });
    verdict(7, "ablation ordering", el, 600.0, r)
}

pub fn solver_performance(m: &CliResult<AccMatrix>) -> Verdict {
    let r = m.as_ref().map_err(|e| CliError::Runtime(e.to_string())).map(|m| {
        let times: Vec<f64> = m.flat.iter().flat_map(|(_, r)| r.solve_times.iter().copied()).collect();
        let mean = times.iter().sum::<f64>() / times.len().max(1) as f64;
        (
            !times.is_empty() && mean <= SOLVE_MEAN_MAX,
            format!("{} solves (n_T = 50), mean {:.2} ms (max {:.0} ms)", times.len(), mean * 1e3, SOLVE_MEAN_MAX * 1e3),
        )
    });
    verdict(8, "solver performance", Duration::ZERO, f64::INFINITY, r)
}

pub fn slope_monotonicity(m: &CliResult<AccMatrix>) -> Verdict {
    let r = m.as_ref().map_err(|e| CliError::Runtime(e.to_string())).map(|m| {
        let (f, r, s) = (mpg_of(m, "emato-b"), m.rolling_b.metrics.mpg, m.steep_b.metrics.mpg);
        (f >= r && r >= s, format!("EMATO-B mpg flat {f:.3} >= rolling {r:.3} >= steep {s:.3}"))
    });
    verdict(9, "slope monotonicity", Duration::ZERO, f64::INFINITY, r)
}

pub fn determinism() -> Verdict {
    let (r, el) = timed(|| {
        let json = |runs: Vec<RunResult>| runs.iter().map(|r| r.to_json()).collect::<emato::Result<Vec<_>>>();
        let a = json(png_metrics()?).map_err(CliError::runtime)?;
        let b = json(png_metrics()?).map_err(CliError::runtime)?;
        let bytes: usize = a.iter().map(String::len).sum();
        Ok((a == b, format!("two PnG runs, {bytes} bytes of metrics JSON, identical: {}", a == b)))
    });
    verdict(10, "determinism", el, f64::INFINITY, r)
}

/// Runs every criterion in order, handing each verdict to `report` as
/// soon as it is known.
pub fn run_all(mut report: impl FnMut(&Verdict)) -> Vec<Verdict> {
    let mut out = Vec::new();
    let mut push = |v: Verdict| {
        report(&v);
        out.push(v);
    };
    push(fuel_fit());
    push(exact_recovery());
    push(gradient_oracle());
    push(png_reproduction());
    let m = acc_matrix();
    push(acc_improvement(&m));
    push(frenet_improvement());
    push(ablation());
    push(solver_performance(&m));
    push(slope_monotonicity(&m));
    push(determinism());
    out.sort_by_key(|v| v.id);
    out
}
