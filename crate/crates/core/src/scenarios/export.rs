//! Per-step records, run results and their file formats.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use crate::error::Result;
use crate::optimizer::Status;
use crate::polytraj::GlobalPose;
use crate::trajectory::Trajectory;

/// One sample in the shared plotting schema.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub s: f64,
    pub d: f64,
    pub l: f64,
    pub v: f64,
    pub a_v: f64,
    pub j: f64,
    #[serde(rename = "θ")]
    pub theta: f64,
    pub a_r: f64,
    pub a_t: f64,
    pub a_b: f64,
    pub f_r: f64,
}

impl StepRow {
    /// Row `k` of a longitudinal trajectory driven along a straight road.
    pub fn longitudinal(z: &Trajectory<f64>, k: usize) -> Self {
        Self {
            t: z.t[k],
            x: z.l[k],
            y: 0.0,
            yaw: 0.0,
            s: z.l[k],
            d: 0.0,
            l: z.l[k],
            v: z.v[k],
            a_v: z.a[k],
            j: z.j[k],
            theta: z.theta[k],
            a_r: z.a_r[k],
            a_t: z.a_t[k],
            a_b: z.a_b[k],
            f_r: z.f_r[k],
        }
    }

    /// Row `k` of a planar trajectory with its pose and road coordinates.
    pub fn planar(z: &Trajectory<f64>, k: usize, pose: &GlobalPose, s: f64, d: f64) -> Self {
        Self { x: pose.x, y: pose.y, yaw: pose.yaw, s, d, ..Self::longitudinal(z, k) }
    }
}

/// Writes rows as CSV with a header.
pub fn write_steps_csv(path: &Path, rows: &[StepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    SolverFallback,
    EmergencyBrake,
    NoFeasibleCandidate,
    HomotopyReject,
    CorridorRelaxed,
    CycleExhausted,
    SafetyViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub detail: String,
}

/// Where the executed segment of one rollout came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanSource {
    Baseline,
    Optimized,
    Fallback,
    PreviousTail,
    EmergencyBrake,
}

/// Deterministic per-rollout record; wall time lives in [`RunResult::solve_times`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub t0: f64,
    pub source: PlanSource,
    pub status: Option<Status>,
    pub iterations: Option<usize>,
    pub objective: Option<f64>,
    pub fuel_ml: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub algorithm: String,
    pub dt: f64,
    pub metrics: Metrics,
    /// Sum of executed-segment fuel, rollout by rollout.
    pub rollout_fuel_ml: f64,
    pub rollouts: Vec<Rollout>,
    pub events: Vec<Event>,
    /// Smallest leader gap (ACC) or agent clearance (Frenet).
    pub min_separation: Option<f64>,
    /// Leader gap per executed step, `(t, gap)`.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub gap: Vec<(f64, f64)>,
    #[serde(skip)]
    pub steps: Vec<StepRow>,
    /// Solver wall times (s); kept out of the JSON for reproducibility.
    #[serde(skip)]
    pub solve_times: Vec<f64>,
}

impl RunResult {
    pub fn mean_solve_time(&self) -> Option<f64> {
        (!self.solve_times.is_empty()).then(|| self.solve_times.iter().sum::<f64>() / self.solve_times.len() as f64)
    }

    pub fn collisions(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::SafetyViolation).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `metrics.json`, `steps.csv` and `events.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.json"), self.to_json()?)?;
        write_steps_csv(&dir.join("steps.csv"), &self.steps)?;
        let mut f = std::fs::File::create(dir.join("events.csv"))?;
        writeln!(f, "t,kind,detail")?;
        for e in &self.events {
            let kind = serde_json::to_value(e.kind)?;
            writeln!(f, "{},{},\"{}\"", e.t, kind.as_str().unwrap_or(""), e.detail.replace('"', "'"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_steps_csv(&p, &[StepRow::default()]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,x,y,yaw,s,d,l,v,a_v,j,θ,a_r,a_t,a_b,f_r");
    }
}
