//! Least-squares identification of the fuel-rate model from map samples.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine_map::{build_engine_map, EngineMap, MapSpec};
use super::fuel::FuelCoeffs;
use super::gear::{fuel_rate_exact, optimize_gear_policy, GearPolicy, Lattice, Transmission};
use crate::dynamics::VehicleParams;
use crate::error::{Error, Result};

/// Samples below this rate are left out of the accuracy metric.
pub const ACCURACY_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSample {
    pub v: f64,
    pub a_t: f64,
    pub f_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub coeffs: FuelCoeffs<f64>,
    /// Mean relative accuracy on the fitting samples, in percent.
    pub accuracy: f64,
    pub n_samples: usize,
}

fn features(v: f64, a: f64) -> [f64; 8] {
    let v2 = v * v;
    [1.0, v, v2, v2 * v, v2 * v2, a, a * v, a * v2]
}

/// Fits `[o0..o4, c0..c2]` by linear least squares.
///
/// Columns are equilibrated before an SVD solve; one refinement pass on the
/// residual brings noise-free recovery down to rounding level.
pub fn fit_fuel_model(samples: &[FitSample], rho_g: f64) -> Result<FitReport> {
    if samples.len() < 8 {
        return Err(Error::DegenerateSamples(format!("{} samples, need at least 8", samples.len())));
    }
    let n = samples.len();
    let mut a = DMatrix::<f64>::zeros(n, 8);
    let mut b = DVector::<f64>::zeros(n);
    for (i, s) in samples.iter().enumerate() {
        for (j, x) in features(s.v, s.a_t).into_iter().enumerate() {
            a[(i, j)] = x;
        }
        b[i] = s.f_r;
    }
    let scale: Vec<f64> = (0..8)
        .map(|j| a.column(j).amax())
        .map(|m| if m > 0.0 { 1.0 / m } else { 1.0 })
        .collect();
    for j in 0..8 {
        a.column_mut(j).scale_mut(scale[j]);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin < 1e-11 * smax {
        return Err(Error::DegenerateSamples(format!(
            "design matrix is rank deficient (condition {:.3e})",
            smax / smin.max(f64::MIN_POSITIVE)
        )));
    }
    let mut x = svd.solve(&b, 0.0).map_err(|e| Error::DegenerateSamples(e.to_string()))?;
    let r = &b - &a * &x;
    let dx = svd.solve(&r, 0.0).map_err(|e| Error::DegenerateSamples(e.to_string()))?;
    x += dx;
    let theta: Vec<f64> = (0..8).map(|j| x[j] * scale[j]).collect();
    let mut coeffs = FuelCoeffs::<f64>::from_f64(
        [theta[0], theta[1], theta[2], theta[3], theta[4]],
        [theta[5], theta[6], theta[7]],
    );
    coeffs.rho_g = rho_g;
    let accuracy = prediction_accuracy(&coeffs, samples);
    Ok(FitReport { coeffs, accuracy, n_samples: n })
}

/// `100·(1 − mean |f̂ − f| / f)` over samples with `f ≥ ACCURACY_FLOOR`.
pub fn prediction_accuracy(coeffs: &FuelCoeffs<f64>, samples: &[FitSample]) -> f64 {
    let (sum, count) = samples
        .iter()
        .filter(|s| s.f_r >= ACCURACY_FLOOR)
        .fold((0.0, 0usize), |(acc, n), s| {
            (acc + (coeffs.rate(s.v, s.a_t) - s.f_r).abs() / s.f_r, n + 1)
        });
    if count == 0 {
        return f64::NAN;
    }
    100.0 * (1.0 - sum / count as f64)
}

/// Exact fuel rate at every feasible policy cell.
pub fn sample_policy(
    map: &EngineMap,
    policy: &GearPolicy,
    params: &VehicleParams<f64>,
) -> Result<Vec<FitSample>> {
    policy
        .feasible_cells()
        .map(|(v, a_t, g)| {
            let f_r = fuel_rate_exact(v, a_t, g, map, &policy.transmission, params)?;
            Ok(FitSample { v, a_t, f_r })
        })
        .collect()
}

/// Fits the model to every ECO-policy cell of a synthetic map on a
/// 1 m/s by 0.1 m/s² lattice spanning the vehicle limits.
pub fn eco_fit(spec: &MapSpec, tx: &Transmission, params: &VehicleParams<f64>, rho_g: f64) -> Result<FitReport> {
    let map = build_engine_map(spec)?;
    let lattice = Lattice::uniform(params.limits.v_max, 1.0, params.limits.a_t_max, 0.1);
    let policy = optimize_gear_policy(&map, tx, &lattice, params)?;
    fit_fuel_model(&sample_policy(&map, &policy, params)?, rho_g)
}

/// Noise-free samples from known coefficients on a `v × a_t` grid.
pub fn synthesize_samples(coeffs: &FuelCoeffs<f64>, v: &[f64], a_t: &[f64]) -> Vec<FitSample> {
    v.iter()
        .flat_map(|&v| a_t.iter().map(move |&a| (v, a)))
        .map(|(v, a_t)| FitSample { v, a_t, f_r: coeffs.rate(v, a_t) })
        .collect()
}

/// Seeded shuffle split into `(train, test)` with `test_frac` held out.
pub fn holdout_split(samples: &[FitSample], test_frac: f64, seed: u64) -> (Vec<FitSample>, Vec<FitSample>) {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (samples.len() as f64 * test_frac).round() as usize;
    let test = idx[..n_test].iter().map(|&i| samples[i]).collect();
    let train = idx[n_test..].iter().map(|&i| samples[i]).collect();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::powertrain::engine_map::{build_engine_map, MapSpec};
    use crate::powertrain::gear::{optimize_gear_policy, Lattice, Transmission};

    fn speeds() -> Vec<f64> {
        (0..=27).map(|v| v as f64).collect()
    }

    fn tractions() -> Vec<f64> {
        (0..=30).map(|a| a as f64 * 0.1).collect()
    }

    #[test]
    fn exact_recovery_of_tabulated_truck() {
        let truth = FuelCoeffs::<f64>::truck();
        let samples = synthesize_samples(&truth, &speeds(), &tractions());
        let fit = fit_fuel_model(&samples, 0.85).unwrap();
        for (got, want) in fit.coeffs.o.iter().chain(&fit.coeffs.c).zip(truth.o.iter().chain(&truth.c)) {
            assert!(((got - want) / want).abs() <= 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn single_speed_is_degenerate() {
        let samples: Vec<FitSample> =
            (0..8).map(|i| FitSample { v: 10.0, a_t: i as f64 * 0.2, f_r: 1.0 + i as f64 }).collect();
        assert!(matches!(fit_fuel_model(&samples, 0.85), Err(Error::DegenerateSamples(_))));
    }

    #[test]
    fn too_few_samples() {
        let samples = vec![FitSample { v: 1.0, a_t: 0.0, f_r: 1.0 }; 7];
        assert!(fit_fuel_model(&samples, 0.85).is_err());
    }

    #[test]
    fn synthetic_map_holdout_accuracy() {
        let params = VehicleParams::truck();
        let map = build_engine_map(&MapSpec::truck()).unwrap();
        let lattice = Lattice::uniform(27.0, 1.0, 3.0, 0.1);
        let gp = optimize_gear_policy(&map, &Transmission::truck(), &lattice, &params).unwrap();
        let samples = sample_policy(&map, &gp, &params).unwrap();
        let (train, test) = holdout_split(&samples, 0.3, 0);
        let fit = fit_fuel_model(&train, 0.85).unwrap();
        let acc = prediction_accuracy(&fit.coeffs, &test);
        assert!(acc >= 95.0, "held-out accuracy {acc:.2}%");
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let samples = synthesize_samples(&FuelCoeffs::sedan(), &speeds(), &tractions());
        let (a1, b1) = holdout_split(&samples, 0.3, 7);
        let (a2, b2) = holdout_split(&samples, 0.3, 7);
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_eq!(a1.len() + b1.len(), samples.len());
    }
}
