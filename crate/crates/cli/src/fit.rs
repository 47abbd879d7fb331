//! Fuel-model fitting from an engine map spec.

use std::path::Path;

use emato::powertrain::{
    build_engine_map, fit_fuel_model, holdout_split, optimize_gear_policy, prediction_accuracy, sample_policy,
    FuelCoeffs, Lattice, MapSpec, Transmission,
};
use emato::scenarios::VehicleKind;
use serde::Serialize;

use crate::io::{read_document, write_atomic};
use crate::{CliError, CliResult};

/// Share of policy cells held out for the accuracy figure.
pub const HOLDOUT: f64 = 0.3;
pub const HOLDOUT_SEED: u64 = 7;

#[derive(Debug, Clone, Serialize)]
pub struct FitOutput {
    pub vehicle: VehicleKind,
    pub source: &'static str,
    pub coeffs: FuelCoeffs<f64>,
    /// Mean accuracy on the held-out cells (%); absent for printed tables.
    pub holdout_accuracy: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

pub fn map_spec(vehicle: VehicleKind, path: Option<&Path>) -> CliResult<MapSpec> {
    match path {
        Some(p) => serde_json::from_value(read_document(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
        None => Ok(match vehicle {
            VehicleKind::Truck => MapSpec::truck(),
            VehicleKind::Sedan => MapSpec::sedan(),
        }),
    }
}

/// Builds the map, optimizes the ECO gear policy and fits on 70% of the
/// policy cells, scoring the rest.
pub fn fit_map(vehicle: VehicleKind, spec: &MapSpec) -> CliResult<FitOutput> {
    let params = vehicle.params();
    let tx = match vehicle {
        VehicleKind::Truck => Transmission::truck(),
        VehicleKind::Sedan => Transmission::sedan(),
    };
    let map = build_engine_map(spec).map_err(CliError::from_run)?;
    let lattice = Lattice::uniform(params.limits.v_max, 1.0, params.limits.a_t_max, 0.1);
    let policy = optimize_gear_policy(&map, &tx, &lattice, &params).map_err(CliError::from_run)?;
    let samples = sample_policy(&map, &policy, &params).map_err(CliError::from_run)?;
    let (train, test) = holdout_split(&samples, HOLDOUT, HOLDOUT_SEED);
    let report = fit_fuel_model(&train, params.fuel.rho_g).map_err(CliError::from_run)?;
    Ok(FitOutput {
        vehicle,
        source: "synthetic-map",
        holdout_accuracy: Some(prediction_accuracy(&report.coeffs, &test)),
        train_accuracy: Some(report.accuracy),
        coeffs: report.coeffs,
        n_train: train.len(),
        n_test: test.len(),
    })
}

pub fn cmd_fit(vehicle: VehicleKind, spec: Option<&Path>, use_appendix: bool, out: &Path) -> CliResult<FitOutput> {
    let fit = if use_appendix {
        FitOutput {
            vehicle,
            source: "appendix",
            coeffs: vehicle.params().fuel,
            holdout_accuracy: None,
            train_accuracy: None,
            n_train: 0,
            n_test: 0,
        }
    } else {
        fit_map(vehicle, &map_spec(vehicle, spec)?)?
    };
    let text = serde_json::to_string_pretty(&fit).map_err(CliError::runtime)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::runtime)?;
    }
    write_atomic(out, text.as_bytes())?;
    Ok(fit)
}
