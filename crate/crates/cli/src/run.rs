//! Single scenario runs.

use std::path::Path;

use emato::scenarios::{count_extrema, run_acc, run_cc_png, run_frenet, EventKind, RunResult, ScenarioConfig};

use crate::io::{emit, write_atomic, Loaded, RunManifest, MANIFEST};
use crate::{CliError, CliResult};

/// Speed changes below this are not counted as extrema (m/s).
pub const EXTREMA_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Png,
    Acc,
    Frenet,
}

impl std::str::FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "png" => Ok(Self::Png),
            "acc" => Ok(Self::Acc),
            "frenet" => Ok(Self::Frenet),
            _ => Err(CliError::Config(format!("unknown scenario '{s}' (png, acc or frenet)"))),
        }
    }
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::Png => "png",
            Self::Acc => "acc",
            Self::Frenet => "frenet",
        }
    }
}

/// Runs one ACC or Frenet config.
pub fn run_single(scenario: Scenario, cfg: &ScenarioConfig) -> CliResult<RunResult> {
    match scenario {
        Scenario::Acc => {
            let cycle = cfg.cycle.load().map_err(CliError::config)?;
            run_acc(cfg, &cycle).map_err(CliError::from_run)
        }
        Scenario::Frenet => run_frenet(cfg).map_err(CliError::from_run),
        Scenario::Png => Err(CliError::Config("the png scenario yields three runs; use run_png".into())),
    }
}

/// The three PnG runs, in report order.
pub fn run_png(cfg: &ScenarioConfig) -> CliResult<Vec<RunResult>> {
    let o = run_cc_png(cfg).map_err(CliError::from_run)?;
    Ok(vec![o.cc, o.emato, o.energy])
}

fn summary_csv(results: &[RunResult]) -> String {
    let mut s = String::from("algorithm,fuel_ml,distance_m,mpg,avg_speed,mean_sq_jerk,speed_extrema,events\n");
    for r in results {
        let v: Vec<f64> = r.steps.iter().map(|x| x.v).collect();
        let m = &r.metrics;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.algorithm,
            m.fuel_ml,
            m.distance,
            m.mpg,
            m.avg_speed,
            m.mean_sq_jerk,
            count_extrema(&v, EXTREMA_TOL),
            r.events.len()
        ));
    }
    s
}

/// Runs a scenario and writes all artifacts plus the manifest into `out`.
/// Returns the results for reporting.
pub fn cmd_run(scenario: Scenario, loaded: &Loaded, out: &Path) -> CliResult<Vec<RunResult>> {
    let cfg = &loaded.config;
    let mut manifest = RunManifest::new(&format!("run {}", scenario.name()), loaded)?;
    let results = match scenario {
        Scenario::Png => run_png(cfg)?,
        s => vec![run_single(s, cfg)?],
    };
    std::fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    if results.len() == 1 {
        manifest.outputs = emit(out, &results[0], &cfg.slope, MANIFEST)?;
    } else {
        for r in &results {
            let files = emit(&out.join(&r.algorithm), r, &cfg.slope, &format!("../{MANIFEST}"))?;
            manifest.outputs.extend(files.into_iter().map(|f| format!("{}/{f}", r.algorithm)));
        }
    }
    write_atomic(&out.join("summary.csv"), summary_csv(&results).as_bytes())?;
    manifest.outputs.push("summary.csv".into());
    manifest.write(out)?;
    for r in &results {
        if let Some(e) = r.events.iter().find(|e| e.kind == EventKind::CycleExhausted) {
            eprintln!("warning: {} run ended with the cycle ({})", r.algorithm, e.detail);
        }
    }
    Ok(results)
}
