//! Run-level efficiency and comfort figures.

use serde::{Deserialize, Serialize};

use super::export::StepRow;
use crate::error::{Error, Result};

/// Miles per gallon from metres per millilitre.
pub const MPG_PER_M_PER_ML: f64 = 1609.344 / 3785.412;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub distance: f64,
    pub duration: f64,
    pub avg_speed: f64,
    pub mean_sq_jerk: f64,
    pub mean_abs_jerk: f64,
    pub fuel_ml: f64,
    pub ml_per_m: f64,
    pub mpg: f64,
}

pub fn mpg_from_ml_per_m(ml_per_m: f64) -> f64 {
    MPG_PER_M_PER_ML / ml_per_m
}

/// Metrics over a stitched run. Every row but the last stands for one
/// executed step of length `dt`; the last row is the terminal state.
/// Distance is measured on road coordinate `s`.
pub fn compute_metrics(rows: &[StepRow], dt: f64) -> Result<Metrics> {
    if rows.len() < 2 {
        return Err(Error::UndefinedEfficiency);
    }
    let steps = &rows[..rows.len() - 1];
    let distance = rows[rows.len() - 1].s - rows[0].s;
    if !(distance > 0.0) {
        return Err(Error::UndefinedEfficiency);
    }
    let n = steps.len() as f64;
    let duration = n * dt;
    let fuel_ml: f64 = steps.iter().map(|r| r.f_r * dt).sum();
    let ml_per_m = fuel_ml / distance;
    Ok(Metrics {
        distance,
        duration,
        avg_speed: distance / duration,
        mean_sq_jerk: steps.iter().map(|r| r.j * r.j).sum::<f64>() / n,
        mean_abs_jerk: steps.iter().map(|r| r.j.abs()).sum::<f64>() / n,
        fuel_ml,
        ml_per_m,
        mpg: mpg_from_ml_per_m(ml_per_m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn run(v: f64, f: f64, j: f64, n: usize) -> Vec<StepRow> {
        (0..n)
            .map(|k| StepRow { t: k as f64 * 0.1, s: v * 0.1 * k as f64, l: v * 0.1 * k as f64, v, j, f_r: f, ..StepRow::default() })
            .collect()
    }

    #[test]
    fn constant_rate() {
        let m = compute_metrics(&run(22.17, 1.0, 0.0, 101), 0.1).unwrap();
        assert_relative_eq!(m.ml_per_m, 1.0 / 22.17, max_relative = 1e-12);
        assert_relative_eq!(m.mpg, MPG_PER_M_PER_ML * 22.17, max_relative = 1e-12);
        assert_relative_eq!(m.mpg * m.ml_per_m, MPG_PER_M_PER_ML, max_relative = 1e-9);
        assert_relative_eq!(m.avg_speed, 22.17, max_relative = 1e-12);
        assert_eq!(m.mean_sq_jerk, 0.0);
        assert_eq!(m.mean_abs_jerk, 0.0);
    }

    #[test]
    fn jerk_metrics() {
        let m = compute_metrics(&run(10.0, 1.0, -2.0, 11), 0.1).unwrap();
        assert_relative_eq!(m.mean_sq_jerk, 4.0);
        assert_relative_eq!(m.mean_abs_jerk, 2.0);
    }

    #[test]
    fn zero_distance() {
        assert!(matches!(compute_metrics(&run(0.0, 1.0, 0.0, 10), 0.1), Err(Error::UndefinedEfficiency)));
        assert!(compute_metrics(&run(1.0, 1.0, 0.0, 1), 0.1).is_err());
    }
}
