//! Vehicle × slope × algorithm experiment grids.

use std::fs;
use std::path::Path;

use emato::dynamics::{SlopeKind, SlopeProfile};
use emato::scenarios::{ScenarioConfig, VehicleKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::io::{emit, read_document, resolve, write_atomic, RunManifest, MANIFEST};
use crate::run::{run_single, Scenario};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub scenario: String,
    pub vehicles: Vec<VehicleKind>,
    pub slopes: Vec<SlopeKind>,
    pub algorithms: Vec<String>,
    /// Base scenario config shared by all cells, in config-file form.
    #[serde(default)]
    pub base: Option<Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellRecord {
    pub vehicle: VehicleKind,
    pub slope: SlopeKind,
    pub algorithm: String,
    pub error: Option<String>,
    pub mpg: f64,
    pub fuel_ml: f64,
    pub distance: f64,
    pub avg_speed: f64,
    pub mean_sq_jerk: f64,
    pub collisions: usize,
    pub events: usize,
    pub mean_solve_ms: Option<f64>,
}

impl MatrixSpec {
    pub fn load(path: &Path) -> CliResult<Self> {
        let p = resolve(path)?;
        serde_json::from_value(read_document(&p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
    }

    pub fn validate(&self) -> CliResult<Scenario> {
        let s: Scenario = self.scenario.parse()?;
        if s == Scenario::Png {
            return Err(CliError::Config("matrices cover the acc and frenet scenarios".into()));
        }
        if self.vehicles.is_empty() || self.slopes.is_empty() || self.algorithms.is_empty() {
            return Err(CliError::Config("matrix spec has an empty axis".into()));
        }
        if self.slopes.contains(&SlopeKind::Custom) {
            return Err(CliError::Config("matrix slopes must be flat, rolling or steep".into()));
        }
        Ok(s)
    }

    fn base_config(&self) -> CliResult<ScenarioConfig> {
        let doc = self.base.clone().unwrap_or_else(|| Value::Object(Default::default()));
        ScenarioConfig::from_value(doc).map_err(CliError::config)
    }

    fn cells(&self) -> Vec<(VehicleKind, SlopeKind, String)> {
        let mut out = Vec::new();
        for &v in &self.vehicles {
            for &s in &self.slopes {
                for a in &self.algorithms {
                    out.push((v, s, a.clone()));
                }
            }
        }
        out
    }
}

/// Baseline each refined algorithm is compared against.
pub fn baseline_of(algo: &str) -> Option<&'static str> {
    match algo {
        "emato-b" | "emato-r" | "emato-v" => Some("quintic"),
        "emato-fv" => Some("qf-v"),
        "emato-fm" => Some("qf-m"),
        "emato-fe" => Some("qf-e"),
        _ => None,
    }
}

fn run_cell(
    scenario: Scenario,
    base: &ScenarioConfig,
    (vehicle, slope, algo): &(VehicleKind, SlopeKind, String),
    out: &Path,
) -> CellRecord {
    let mut rec = CellRecord {
        vehicle: *vehicle,
        slope: *slope,
        algorithm: algo.clone(),
        error: None,
        mpg: f64::NAN,
        fuel_ml: f64::NAN,
        distance: f64::NAN,
        avg_speed: f64::NAN,
        mean_sq_jerk: f64::NAN,
        collisions: 0,
        events: 0,
        mean_solve_ms: None,
    };
    let result = (|| {
        let mut cfg = base.clone();
        cfg.vehicle = *vehicle;
        cfg.slope = SlopeProfile::of_kind(*slope).map_err(CliError::config)?;
        cfg.algorithm = algo.clone();
        let r = run_single(scenario, &cfg)?;
        // Written under a temp name and renamed, so a cell directory is
        // either complete or absent.
        let name = format!("{vehicle}-{slope}-{algo}");
        let tmp = out.join(format!(".{name}.partial"));
        let _ = fs::remove_dir_all(&tmp);
        emit(&tmp, &r, &cfg.slope, &format!("../{MANIFEST}"))?;
        let dest = out.join(&name);
        let _ = fs::remove_dir_all(&dest);
        fs::rename(&tmp, &dest).map_err(CliError::runtime)?;
        Ok::<_, CliError>(r)
    })();
    match result {
        Ok(r) => {
            let m = &r.metrics;
            rec.mpg = m.mpg;
            rec.fuel_ml = m.fuel_ml;
            rec.distance = m.distance;
            rec.avg_speed = m.avg_speed;
            rec.mean_sq_jerk = m.mean_sq_jerk;
            rec.collisions = r.collisions();
            rec.events = r.events.len();
            rec.mean_solve_ms = r.mean_solve_time().map(|t| t * 1e3);
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

fn summary_csv(cells: &[CellRecord]) -> String {
    let mut s = String::from(
        "vehicle,slope,algorithm,status,mpg,fuel_ml,distance_m,avg_speed,mean_sq_jerk,collisions,events,mean_solve_ms\n",
    );
    for c in cells {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.vehicle,
            c.slope,
            c.algorithm,
            c.error.as_deref().map_or("ok".to_string(), |e| format!("\"{}\"", e.replace('"', "'"))),
            c.mpg,
            c.fuel_ml,
            c.distance,
            c.avg_speed,
            c.mean_sq_jerk,
            c.collisions,
            c.events,
            c.mean_solve_ms.map_or(String::new(), |t| t.to_string()),
        ));
    }
    s
}

/// Gains in percent for one vehicle and slope, one per column.
pub type GainRow = (VehicleKind, SlopeKind, Vec<Option<f64>>);

/// Percentage mpg gain of each refined algorithm over its baseline, one
/// row per vehicle and slope.
pub fn improvements(cells: &[CellRecord]) -> (Vec<String>, Vec<GainRow>) {
    let mut pairs: Vec<(String, &str)> = Vec::new();
    for c in cells {
        if let Some(b) = baseline_of(&c.algorithm) {
            if !pairs.iter().any(|(a, _)| *a == c.algorithm) && cells.iter().any(|x| x.algorithm == b) {
                pairs.push((c.algorithm.clone(), b));
            }
        }
    }
    let find = |v, s, a: &str| cells.iter().find(|c| c.vehicle == v && c.slope == s && c.algorithm == a && c.error.is_none());
    let mut rows: Vec<GainRow> = Vec::new();
    for c in cells {
        if rows.iter().any(|(v, s, _)| *v == c.vehicle && *s == c.slope) {
            continue;
        }
        let gains = pairs
            .iter()
            .map(|(a, b)| match (find(c.vehicle, c.slope, a), find(c.vehicle, c.slope, b)) {
                (Some(e), Some(q)) => Some(100.0 * (e.mpg / q.mpg - 1.0)),
                _ => None,
            })
            .collect();
        rows.push((c.vehicle, c.slope, gains));
    }
    let headers = pairs.iter().map(|(a, b)| format!("{} vs {}", a.to_uppercase(), display_name(b))).collect();
    (headers, rows)
}

fn display_name(algo: &str) -> String {
    match algo {
        "quintic" => "Quintic".into(),
        other => other.to_uppercase(),
    }
}

fn improvements_csv(cells: &[CellRecord]) -> String {
    let (headers, rows) = improvements(cells);
    let mut s = format!("vehicle,slope,{}\n", headers.join(","));
    for (v, sl, gains) in rows {
        let g: Vec<String> = gains.iter().map(|x| x.map_or(String::new(), |x| format!("{x:.2}"))).collect();
        s.push_str(&format!("{v},{sl},{}\n", g.join(",")));
    }
    s
}

/// Runs every cell on a pool of `jobs` workers. Failed cells are recorded
/// and the rest still run.
pub fn cmd_matrix(spec: &MatrixSpec, spec_path: Option<&Path>, out: &Path, jobs: usize) -> CliResult<Vec<CellRecord>> {
    let scenario = spec.validate()?;
    let base = spec.base_config()?;
    fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(CliError::runtime)?;
    let cells = spec.cells();
    let records: Vec<CellRecord> = pool.install(|| cells.par_iter().map(|c| run_cell(scenario, &base, c, out)).collect());

    let loaded = crate::io::Loaded {
        config: base,
        config_path: spec_path.map(Path::to_path_buf),
        inputs: spec_path.iter().map(|p| p.to_path_buf()).collect(),
    };
    let mut manifest = RunManifest::new(&format!("matrix {}", scenario.name()), &loaded)?;
    write_atomic(&out.join("summary.csv"), summary_csv(&records).as_bytes())?;
    write_atomic(&out.join("improvements.csv"), improvements_csv(&records).as_bytes())?;
    manifest.outputs = vec!["summary.csv".into(), "improvements.csv".into()];
    manifest.outputs.extend(records.iter().filter(|r| r.error.is_none()).map(|r| format!("{}-{}-{}/", r.vehicle, r.slope, r.algorithm)));
    manifest.write(out)?;
    Ok(records)
}
