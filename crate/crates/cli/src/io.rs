//! Config loading, run manifests and artifact emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use emato::dynamics::{SlopeKind, SlopeProfile};
use emato::scenarios::{write_steps_csv, CycleSource, FuelModel, RunResult, ScenarioConfig, VehicleKind};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

pub const CONFIG_DIR_ENV: &str = "EMATO_CONFIG_DIR";

/// Flags that override individual config entries.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Scenario config (TOML or JSON); relative paths also resolve against $EMATO_CONFIG_DIR.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub vehicle: Option<VehicleKind>,
    /// flat, rolling, steep or file (with --slope-file).
    #[arg(long)]
    pub slope: Option<SlopeKind>,
    /// Grade table with columns s, theta.
    #[arg(long)]
    pub slope_file: Option<PathBuf>,
    #[arg(long)]
    pub algo: Option<String>,
    /// Leader speed trace (CSV with time_s and speed_mps).
    #[arg(long)]
    pub cycle: Option<PathBuf>,
    /// Read the --cycle file's speed_mph column instead.
    #[arg(long)]
    pub mph: bool,
    /// Course length (PnG, Frenet) or distance budget (ACC), in metres.
    #[arg(long)]
    pub distance: Option<f64>,
    /// Seed of the synthetic traffic layout.
    #[arg(long)]
    pub seed: Option<u64>,
    /// appendix or synthetic-fit.
    #[arg(long)]
    pub fuel: Option<FuelModel>,
}

/// Finds `p` as given, or under the config directory when relative.
pub fn resolve(p: &Path) -> CliResult<PathBuf> {
    if p.exists() {
        return Ok(p.to_path_buf());
    }
    if p.is_relative() {
        if let Ok(dir) = std::env::var(CONFIG_DIR_ENV) {
            let q = Path::new(&dir).join(p);
            if q.exists() {
                return Ok(q);
            }
        }
    }
    Err(CliError::Config(format!("{}: file not found", p.display())))
}

/// Parses a TOML or JSON document, chosen by extension.
pub fn read_document(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e == "json");
    let doc = if json {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    Ok(doc)
}

/// Config source plus the input files it pulled in.
pub struct Loaded {
    pub config: ScenarioConfig,
    pub config_path: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
}

/// Explicit `--config`, else `$EMATO_CONFIG_DIR/<scenario>.toml` when
/// present, else built-in defaults; flags are applied last.
pub fn load_config(scenario: &str, ov: &Overrides) -> CliResult<Loaded> {
    let path = match &ov.config {
        Some(p) => Some(resolve(p)?),
        None => std::env::var(CONFIG_DIR_ENV)
            .ok()
            .map(|d| Path::new(&d).join(format!("{scenario}.toml")))
            .filter(|p| p.exists()),
    };
    let doc = match &path {
        Some(p) => unwrap_manifest(read_document(p)?),
        None => Value::Object(Default::default()),
    };
    let mut config = ScenarioConfig::from_value(doc).map_err(CliError::config)?;
    let mut inputs: Vec<PathBuf> = path.iter().cloned().collect();
    apply(&mut config, scenario, ov, &mut inputs)?;
    if let CycleSource::File { path, .. } = &config.cycle {
        inputs.push(PathBuf::from(path));
    }
    inputs.dedup();
    Ok(Loaded { config, config_path: path, inputs })
}

/// A run manifest stands in for a config: its snapshot is used as is.
fn unwrap_manifest(doc: Value) -> Value {
    match doc {
        Value::Object(mut m) if m.contains_key("tool_version") && m.contains_key("config") => {
            m.remove("config").unwrap_or_default()
        }
        other => other,
    }
}

fn apply(cfg: &mut ScenarioConfig, scenario: &str, ov: &Overrides, inputs: &mut Vec<PathBuf>) -> CliResult<()> {
    if let Some(v) = ov.vehicle {
        cfg.vehicle = v;
    }
    if let Some(f) = &ov.fuel {
        cfg.fuel = *f;
    }
    if let Some(a) = &ov.algo {
        cfg.algorithm = a.clone();
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    match (ov.slope, &ov.slope_file) {
        (Some(SlopeKind::Custom), Some(p)) | (None, Some(p)) => {
            let p = resolve(p)?;
            cfg.slope = SlopeProfile::from_csv(&p).map_err(CliError::config)?;
            inputs.push(p);
        }
        (Some(SlopeKind::Custom), None) => return Err(CliError::Config("--slope file needs --slope-file".into())),
        (Some(kind), _) => cfg.slope = SlopeProfile::of_kind(kind).map_err(CliError::config)?,
        (None, None) => {}
    }
    if let Some(p) = &ov.cycle {
        let p = resolve(p)?;
        cfg.cycle = CycleSource::File { path: p.to_string_lossy().into_owned(), mph: ov.mph };
    }
    if let Some(d) = ov.distance {
        match scenario {
            "png" => cfg.png.distance = d,
            "frenet" => cfg.frenet.distance = d,
            _ => cfg.distance_budget = Some(d),
        }
    }
    cfg.validate().map_err(CliError::config)
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Record of what produced a set of artifacts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub config: ScenarioConfig,
    pub tool_version: String,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

pub const MANIFEST: &str = "manifest.json";

impl RunManifest {
    pub fn new(command: &str, loaded: &Loaded) -> CliResult<Self> {
        let inputs = loaded
            .inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), sha256_file(p)?)))
            .collect::<CliResult<_>>()?;
        Ok(Self {
            command: command.into(),
            config_path: loaded.config_path.as_ref().map(|p| p.display().to_string()),
            config: loaded.config.clone(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            inputs,
            outputs: Vec::new(),
        })
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(CliError::runtime)?;
        write_atomic(&dir.join(MANIFEST), text.as_bytes())
    }
}

/// Writes through a sibling temp file so readers never see partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path)).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn csv_text(header: &str, rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|x| x.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Metrics JSON tagged with the manifest that produced it.
pub fn metrics_json(result: &RunResult, manifest: &str) -> CliResult<String> {
    let mut v = serde_json::to_value(result).map_err(CliError::runtime)?;
    if let Value::Object(m) = &mut v {
        m.insert("manifest".into(), Value::String(manifest.into()));
    }
    serde_json::to_string_pretty(&v).map_err(CliError::runtime)
}

/// Solver timings, kept apart from the reproducible metrics.
pub fn timing_json(result: &RunResult) -> CliResult<String> {
    let t = &result.solve_times;
    let v = serde_json::json!({
        "solves": t.len(),
        "mean_s": result.mean_solve_time(),
        "max_s": t.iter().cloned().fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x)))),
    });
    serde_json::to_string_pretty(&v).map_err(CliError::runtime)
}

/// Writes metrics, steps, events, timing and plot data for one run into
/// `dir`; returns the file names written.
pub fn emit(dir: &Path, result: &RunResult, slope: &SlopeProfile, manifest: &str) -> CliResult<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    let mut put = |name: &str, text: String| -> CliResult<()> {
        write_atomic(&dir.join(name), text.as_bytes())?;
        files.push(name.to_string());
        Ok(())
    };
    put("metrics.json", metrics_json(result, manifest)?)?;
    put("timing.json", timing_json(result)?)?;

    let mut events = String::from("t,kind,detail\n");
    for e in &result.events {
        let kind = serde_json::to_value(e.kind).map_err(CliError::runtime)?;
        events.push_str(&format!("{},{},\"{}\"\n", e.t, kind.as_str().unwrap_or(""), e.detail.replace('"', "'")));
    }
    put("events.csv", events)?;

    let steps = &result.steps;
    put("speed_vs_l.csv", csv_text("l,v", steps.iter().map(|r| vec![r.l, r.v])))?;
    put("elevation_vs_s.csv", csv_text("s,elevation", steps.iter().map(|r| vec![r.s, slope.elevation(r.s)])))?;
    put("fuel_rate_vs_t.csv", csv_text("t,f_r", steps.iter().map(|r| vec![r.t, r.f_r])))?;
    if !result.gap.is_empty() {
        put("gap_vs_t.csv", csv_text("t,gap", result.gap.iter().map(|(t, g)| vec![*t, *g])))?;
    }
    if result.scenario == "frenet" {
        put("lane_trace.csv", csv_text("t,s,d,x,y", steps.iter().map(|r| vec![r.t, r.s, r.d, r.x, r.y])))?;
    }
    put("plot.gp", gnuplot(!result.gap.is_empty(), result.scenario == "frenet"))?;

    let tmp = dir.join("steps.csv.tmp");
    write_steps_csv(&tmp, steps).map_err(CliError::runtime)?;
    fs::rename(&tmp, dir.join("steps.csv")).map_err(CliError::runtime)?;
    files.push("steps.csv".into());
    Ok(files)
}

fn gnuplot(gap: bool, lanes: bool) -> String {
    let mut panels = vec![
        ("speed_vs_l.csv", "l (m)", "v (m/s)"),
        ("elevation_vs_s.csv", "s (m)", "elevation (m)"),
        ("fuel_rate_vs_t.csv", "t (s)", "f_r (mL/s)"),
    ];
    if gap {
        panels.push(("gap_vs_t.csv", "t (s)", "gap (m)"));
    }
    if lanes {
        panels.push(("lane_trace.csv", "s (m)", "d (m)"));
    }
    let mut s = format!(
        "set datafile separator ','\nset terminal pngcairo size 900,{}\nset output 'run.png'\nset multiplot layout {},1\nunset key\n",
        250 * panels.len(),
        panels.len()
    );
    for (file, x, y) in panels {
        let cols = if file == "lane_trace.csv" { "2:3" } else { "1:2" };
        s.push_str(&format!("set xlabel '{x}'\nset ylabel '{y}'\nplot '{file}' every ::1 using {cols} with lines\n"));
    }
    s.push_str("unset multiplot\n");
    s
}
