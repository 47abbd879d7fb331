//! Leader speed traces and their integration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::LeadPrediction;

const MPH: f64 = 0.44704;

/// Speed trace with linear interpolation between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingCycle {
    pub name: String,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    /// Distance at each sample (exact integral of the interpolant).
    #[serde(skip)]
    dist: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct CycleRow {
    time_s: f64,
    #[serde(default)]
    speed_mps: Option<f64>,
    #[serde(default)]
    speed_mph: Option<f64>,
}

impl DrivingCycle {
    pub fn new(name: impl Into<String>, t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if t.len() < 2 || t.len() != v.len() {
            return Err(Error::InvalidSpec(format!("cycle {name}: need matching t/v with ≥ 2 rows")));
        }
        if t[0] != 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSpec(format!("cycle {name}: t must start at 0 and increase")));
        }
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidSpec(format!("cycle {name}: speeds must be finite and ≥ 0")));
        }
        let mut dist = vec![0.0; t.len()];
        for i in 1..t.len() {
            dist[i] = dist[i - 1] + 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
        }
        Ok(Self { name, t, v, dist })
    }

    /// Reads `time_s` plus `speed_mps` (or `speed_mph` when `mph` is set).
    pub fn from_csv(path: &Path, mph: bool) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let (mut t, mut v) = (Vec::new(), Vec::new());
        for row in rdr.deserialize() {
            let row: CycleRow = row?;
            let speed = if mph {
                row.speed_mph.map(|s| s * MPH)
            } else {
                row.speed_mps
            };
            let speed = speed.ok_or_else(|| {
                Error::InvalidSpec(format!(
                    "{}: missing {} column",
                    path.display(),
                    if mph { "speed_mph" } else { "speed_mps" }
                ))
            })?;
            t.push(row.time_s);
            v.push(speed);
        }
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::new(name, t, v)
    }

    /// Uniform trace at a fixed speed.
    pub fn constant(v: f64, duration: f64) -> Result<Self> {
        Self::new("constant", vec![0.0, duration], vec![v, v])
    }

    pub fn duration(&self) -> f64 {
        *self.t.last().unwrap_or(&0.0)
    }

    pub fn total_distance(&self) -> f64 {
        *self.dist.last().unwrap_or(&0.0)
    }

    pub fn mean_speed(&self) -> f64 {
        self.total_distance() / self.duration()
    }

    fn segment(&self, t: f64) -> usize {
        self.t.partition_point(|x| *x <= t).saturating_sub(1).min(self.t.len() - 2)
    }

    /// Speed at `t`, held at the last value beyond the trace.
    pub fn speed_at(&self, t: f64) -> f64 {
        if t >= self.duration() {
            return *self.v.last().unwrap();
        }
        let i = self.segment(t.max(0.0));
        let r = (t.max(0.0) - self.t[i]) / (self.t[i + 1] - self.t[i]);
        self.v[i] + r * (self.v[i + 1] - self.v[i])
    }

    /// Distance covered by `t`, extrapolated at the last speed beyond the
    /// trace.
    pub fn distance_at(&self, t: f64) -> f64 {
        let end = self.duration();
        if t >= end {
            return self.total_distance() + (t - end) * self.v.last().unwrap();
        }
        let t = t.max(0.0);
        let i = self.segment(t);
        let h = t - self.t[i];
        let slope = (self.v[i + 1] - self.v[i]) / (self.t[i + 1] - self.t[i]);
        self.dist[i] + self.v[i] * h + 0.5 * slope * h * h
    }

    /// Restores the distance table after deserialisation.
    pub fn rebuilt(self) -> Result<Self> {
        Self::new(self.name, self.t, self.v)
    }
}

/// Concatenates cycles with a standstill splice between them.
pub fn composite(name: &str, cycles: &[DrivingCycle], splice: f64) -> Result<DrivingCycle> {
    let (mut t, mut v) = (Vec::new(), Vec::new());
    let mut offset = 0.0;
    for (n, c) in cycles.iter().enumerate() {
        if n > 0 {
            offset += splice;
        }
        for (ti, vi) in c.t.iter().zip(&c.v) {
            let tt = offset + ti;
            if t.last().is_some_and(|last| tt <= *last) {
                continue;
            }
            t.push(tt);
            v.push(*vi);
        }
        offset += c.duration();
    }
    DrivingCycle::new(name, t, v)
}

/// Smooth speed trace through `(t, v)` knots at 1 s resolution; each leg
/// uses a cosine blend so acceleration is continuous at the knots.
fn blended(name: &str, knots: &[(f64, f64)]) -> DrivingCycle {
    let end = knots.last().unwrap().0;
    let (mut t, mut v) = (Vec::new(), Vec::new());
    let mut leg = 0;
    for i in 0..=(end as usize) {
        let ti = i as f64;
        while leg + 2 < knots.len() && ti > knots[leg + 1].0 {
            leg += 1;
        }
        let ((t0, v0), (t1, v1)) = (knots[leg], knots[leg + 1]);
        let r = ((ti - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let w = 0.5 - 0.5 * (std::f64::consts::PI * r).cos();
        t.push(ti);
        v.push(v0 + w * (v1 - v0));
    }
    DrivingCycle::new(name, t, v).expect("knot tables are valid")
}

/// Top speed of the highway trace, below the truck's limit (m/s).
const HIGHWAY_CAP: f64 = 26.5;

/// Highway-style trace: 765 s, mean speed about 21.5 m/s.
pub fn synthetic_highway() -> DrivingCycle {
    let knots = [
        (0.0, 0.0),
        (25.0, 14.0),
        (45.0, 20.0),
        (75.0, 22.5),
        (105.0, 19.5),
        (135.0, 23.0),
        (165.0, 25.5),
        (195.0, 24.0),
        (225.0, 26.0),
        (255.0, 24.5),
        (285.0, 21.0),
        (310.0, 17.5),
        (335.0, 20.5),
        (365.0, 24.5),
        (395.0, 26.5),
        (425.0, 26.0),
        (455.0, 24.5),
        (485.0, 22.0),
        (515.0, 20.5),
        (545.0, 23.5),
        (575.0, 25.5),
        (605.0, 24.5),
        (635.0, 26.0),
        (665.0, 25.0),
        (695.0, 22.5),
        (720.0, 18.0),
        (740.0, 11.0),
        (755.0, 4.0),
        (765.0, 0.0),
    ];
    let base = blended("highway", &knots);
    // Short-period speed ripple of the kind recorded in highway traces,
    // faded in with speed so the start and stop stay clean.
    let ripple = [(0.55, 9.0, 0.0), (0.35, 14.0, 1.3), (0.25, 23.0, 2.9)];
    let v = base
        .t
        .iter()
        .zip(&base.v)
        .map(|(t, v)| {
            let fade = (v / 15.0).min(1.0);
            let r: f64 = ripple.iter().map(|(amp, period, phase)| amp * (std::f64::consts::TAU * t / period + phase).sin()).sum();
            (v + fade * r).clamp(0.0, HIGHWAY_CAP)
        })
        .collect();
    DrivingCycle::new("highway", base.t, v).expect("ripple keeps speeds valid")
}

/// Stop-and-go trace with five short trips.
pub fn synthetic_urban() -> DrivingCycle {
    let mut knots = vec![(0.0, 0.0)];
    let trips = [(12.0, 60.0), (15.0, 80.0), (9.0, 45.0), (14.0, 70.0), (11.0, 55.0)];
    let mut t = 0.0;
    for (peak, len) in trips {
        knots.push((t + 0.3 * len, peak));
        knots.push((t + 0.6 * len, peak * 0.85));
        knots.push((t + len, 0.0));
        knots.push((t + len + 15.0, 0.0));
        t += len + 15.0;
    }
    blended("urban", &knots)
}

/// Leader position and speed at `t0 + k·dt`, relative to `l0` at `t0`.
pub fn lead_prediction(cycle: &DrivingCycle, t0: f64, l0: f64, n: usize, dt: f64) -> Result<LeadPrediction> {
    if t0 > cycle.duration() {
        return Err(Error::CycleExhausted(t0));
    }
    let base = cycle.distance_at(t0);
    let times = (0..n).map(|k| t0 + k as f64 * dt);
    Ok(LeadPrediction {
        l: times.clone().map(|t| l0 + cycle.distance_at(t) - base).collect(),
        v: times.map(|t| cycle.speed_at(t)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_cycle_steps() {
        let c = DrivingCycle::constant(20.0, 100.0).unwrap();
        let p = lead_prediction(&c, 37.3, 5.0, 50, 0.1).unwrap();
        for k in 1..50 {
            assert_relative_eq!(p.l[k] - p.l[k - 1], 2.0, epsilon = 1e-9);
        }
        assert_eq!(p.l[0], 5.0);
    }

    #[test]
    fn hold_last_speed() {
        let c = DrivingCycle::new("ramp", vec![0.0, 10.0], vec![0.0, 10.0]).unwrap();
        let p = lead_prediction(&c, 8.0, 0.0, 50, 0.1).unwrap();
        // Last 3 s are extrapolated at 10 m/s.
        for k in 21..50 {
            assert_eq!(p.v[k], 10.0);
            assert_relative_eq!(p.l[k] - p.l[k - 1], 1.0, epsilon = 1e-9);
        }
        assert!(matches!(lead_prediction(&c, 10.5, 0.0, 50, 0.1), Err(Error::CycleExhausted(_))));
    }

    #[test]
    fn ramp_matches_trapezoid() {
        let c = DrivingCycle::new("ramp", vec![0.0, 4.0, 9.0], vec![0.0, 8.0, 3.0]).unwrap();
        let p = lead_prediction(&c, 0.0, 0.0, 91, 0.1).unwrap();
        // Trapezoid rule on a fine grid is exact for a piecewise-linear speed
        // whose breakpoints lie on the grid.
        let mut acc = 0.0;
        for k in 1..91 {
            acc += 0.5 * (p.v[k] + p.v[k - 1]) * 0.1;
            assert!((p.l[k] - acc).abs() <= 1e-9, "k={k}");
        }
        assert_relative_eq!(c.total_distance(), 16.0 + 27.5, epsilon = 1e-12);
        assert!(p.l.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn highway_shape() {
        let c = synthetic_highway();
        assert_eq!(c.duration(), 765.0);
        assert!((c.mean_speed() - 21.5).abs() < 0.5, "mean {}", c.mean_speed());
        let acc = c.v.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(acc < 2.0);
        assert!(c.v.iter().all(|v| *v <= 27.0));
    }

    #[test]
    fn composite_splices() {
        let a = DrivingCycle::constant(10.0, 20.0).unwrap();
        let c = composite("ab", &[a.clone(), a], 5.0).unwrap();
        assert_eq!(c.duration(), 45.0);
        assert!(c.t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn csv_ingestion() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "time_s,speed_mph\n0,0\n1,10\n2,20\n").unwrap();
        let c = DrivingCycle::from_csv(&p, true).unwrap();
        assert_relative_eq!(c.v[2], 20.0 * MPH, epsilon = 1e-12);
        assert!(DrivingCycle::from_csv(&p, false).is_err());
    }
}
