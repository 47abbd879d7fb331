//! Scenario configuration with tabulated vehicle defaults and dotted-key overrides.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::cycle::{composite, synthetic_highway, synthetic_urban, DrivingCycle};
use crate::dynamics::{SlopeProfile, VehicleParams};
use crate::error::{Error, Result};
use crate::optimizer::AccParams;
use crate::powertrain::{eco_fit, FuelCoeffs, MapSpec, Transmission};
use crate::polytraj::{Geometry, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleKind {
    Sedan,
    Truck,
}

impl VehicleKind {
    pub fn params(self) -> VehicleParams<f64> {
        match self {
            VehicleKind::Sedan => VehicleParams::sedan(),
            VehicleKind::Truck => VehicleParams::truck(),
        }
    }
}

/// Source of the fuel-rate coefficients used in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FuelModel {
    /// Printed coefficient table.
    Appendix,
    /// Fit to the vehicle's synthetic engine map under the ECO gear policy.
    SyntheticFit,
    Custom(FuelCoeffs<f64>),
}

impl FromStr for FuelModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "appendix" => Ok(Self::Appendix),
            "synthetic-fit" => Ok(Self::SyntheticFit),
            _ => Err(Error::InvalidArgument(format!("unknown fuel model '{s}'"))),
        }
    }
}

static TRUCK_FIT: OnceLock<std::result::Result<FuelCoeffs<f64>, String>> = OnceLock::new();
static SEDAN_FIT: OnceLock<std::result::Result<FuelCoeffs<f64>, String>> = OnceLock::new();

impl VehicleKind {
    /// Synthetic-map fit, computed once per process.
    pub fn synthetic_fuel(self) -> Result<FuelCoeffs<f64>> {
        let (cell, spec, tx) = match self {
            VehicleKind::Truck => (&TRUCK_FIT, MapSpec::truck(), Transmission::truck()),
            VehicleKind::Sedan => (&SEDAN_FIT, MapSpec::sedan(), Transmission::sedan()),
        };
        cell.get_or_init(|| {
            let params = self.params();
            eco_fit(&spec, &tx, &params, params.fuel.rho_g).map(|r| r.coeffs).map_err(|e| e.to_string())
        })
        .clone()
        .map_err(Error::InvalidSpec)
    }
}

impl FromStr for VehicleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sedan" => Ok(Self::Sedan),
            "truck" => Ok(Self::Truck),
            _ => Err(Error::InvalidArgument(format!("unknown vehicle '{s}'"))),
        }
    }
}

impl fmt::Display for VehicleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sedan => "sedan",
            Self::Truck => "truck",
        })
    }
}

/// Objective weight vectors `[w_v, w_a, w_b, w_j, w_f]` per algorithm family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightTable {
    /// Refinement weights for the ACC and Frenet variants.
    pub emato: [f64; 5],
    /// Speed tracking weight of the tracking ACC variant.
    pub emato_v_tracking: f64,
    /// Refinement weights of the pulse-and-glide case.
    pub png: [f64; 5],
    /// Candidate selection of the energy policy.
    pub energy: [f64; 5],
    pub qf_v: [f64; 5],
    pub qf_m: [f64; 5],
    pub qf_e: [f64; 5],
}

impl Default for WeightTable {
    fn default() -> Self {
        Self {
            emato: [0.0, 14.51, 14.51, 1.16, 38.91],
            emato_v_tracking: 0.01,
            png: [0.0, 0.0001, 0.0001, 0.0001, 35.0],
            energy: [0.0, 0.0, 0.0, 0.0, 1.0],
            qf_v: [1.0, 0.0, 0.0, 0.0, 0.0],
            qf_m: [1.0, 0.0, 0.0, 0.001, 100.0],
            qf_e: [0.0, 0.0, 0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PngParams {
    pub v_d: f64,
    pub distance: f64,
    pub replan_distance: f64,
    /// Half range of the end-speed grid of the energy baseline (m/s).
    pub speed_spread: f64,
    pub speed_step: f64,
}

impl Default for PngParams {
    fn default() -> Self {
        Self { v_d: 20.0, distance: 900.0, replan_distance: 150.0, speed_spread: 2.0, speed_step: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrenetParams {
    pub lane_offsets: Vec<f64>,
    pub lane_speeds_kmh: Vec<f64>,
    pub v_d: f64,
    pub vehicles_per_lane: usize,
    pub vehicle_gap: f64,
    /// Road coordinate of the rearmost vehicle in each lane.
    pub first_vehicle_s: Vec<f64>,
    pub ego_lane: usize,
    pub ego_speed: f64,
    pub distance: f64,
    pub road_length: f64,
    /// End-speed offsets from `v_d` for candidate sampling.
    pub speed_offsets: Vec<f64>,
    pub geometry: Geometry,
}

impl Default for FrenetParams {
    fn default() -> Self {
        Self {
            lane_offsets: vec![-3.5, 0.0, 3.5],
            lane_speeds_kmh: vec![50.0, 56.0, 60.0],
            v_d: 19.44,
            vehicles_per_lane: 2,
            vehicle_gap: 120.0,
            first_vehicle_s: vec![60.0, 40.0, 20.0],
            ego_lane: 1,
            ego_speed: 13.89,
            distance: 2200.0,
            road_length: 3000.0,
            speed_offsets: vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0],
            geometry: Geometry::default(),
        }
    }
}

/// Which leader trace the ACC scenario follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleSource {
    Highway,
    Urban,
    Composite,
    File { path: String, mph: bool },
}

/// Standstill between the traces of the composite cycle (s).
pub const COMPOSITE_SPLICE: f64 = 5.0;

impl CycleSource {
    pub fn load(&self) -> Result<DrivingCycle> {
        match self {
            CycleSource::Highway => Ok(synthetic_highway()),
            CycleSource::Urban => Ok(synthetic_urban()),
            CycleSource::Composite => {
                composite("composite", &[synthetic_urban(), synthetic_highway()], COMPOSITE_SPLICE)
            }
            CycleSource::File { path, mph } => DrivingCycle::from_csv(Path::new(path), *mph),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub vehicle: VehicleKind,
    pub fuel: FuelModel,
    pub slope: SlopeProfile,
    pub horizon: f64,
    pub dt: f64,
    /// Replanning interval in seconds (ACC and Frenet).
    pub replan: f64,
    pub algorithm: String,
    pub weights: WeightTable,
    pub acc: AccParams,
    pub png: PngParams,
    pub frenet: FrenetParams,
    pub cycle: CycleSource,
    /// Distance after which an ACC run stops (m).
    pub distance_budget: Option<f64>,
    /// Only perturbs the synthetic traffic layout.
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            vehicle: VehicleKind::Truck,
            fuel: FuelModel::Appendix,
            slope: SlopeProfile::flat(),
            horizon: 5.0,
            dt: 0.1,
            replan: 1.0,
            algorithm: "emato-b".into(),
            weights: WeightTable::default(),
            acc: AccParams::default(),
            png: PngParams::default(),
            frenet: FrenetParams::default(),
            cycle: CycleSource::Highway,
            distance_budget: Some(8000.0),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Steps per horizon, `ΔT/dt + 1` samples from `0` to `ΔT` exclusive of
    /// the last boundary.
    pub fn n_t(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Steps executed per rollout.
    pub fn replan_steps(&self) -> usize {
        (self.replan / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let ratio = self.horizon / self.dt;
        if !(self.dt > 0.0) || !(self.horizon > 0.0) || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!("horizon {} is not a multiple of dt {}", self.horizon, self.dt)));
        }
        if !(self.replan > 0.0) || self.replan > self.horizon + 1e-12 {
            return Err(Error::InvalidSpec(format!("replan interval {} must be in (0, horizon]", self.replan)));
        }
        let r = self.replan / self.dt;
        if (r - r.round()).abs() > 1e-9 {
            return Err(Error::InvalidSpec("replan interval must be a multiple of dt".into()));
        }
        self.slope.validate()?;
        self.acc.validate()?;
        let f = &self.frenet;
        if f.lane_offsets.len() != f.lane_speeds_kmh.len()
            || f.first_vehicle_s.len() != f.lane_offsets.len()
            || f.ego_lane >= f.lane_offsets.len()
        {
            return Err(Error::InvalidSpec("frenet lane tables disagree in length".into()));
        }
        let tables = [
            self.weights.emato,
            self.weights.png,
            self.weights.energy,
            self.weights.qf_v,
            self.weights.qf_m,
            self.weights.qf_e,
        ];
        if tables.iter().flatten().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidSpec("weights must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<VehicleParams<f64>> {
        let mut p = self.vehicle.params();
        match &self.fuel {
            FuelModel::Appendix => {}
            FuelModel::SyntheticFit => p.fuel = self.vehicle.synthetic_fuel()?,
            FuelModel::Custom(c) => p.fuel = *c,
        }
        Ok(p)
    }

    pub fn weights(w: [f64; 5], v_d: f64) -> Weights<f64> {
        Weights::new(w, v_d)
    }

    /// Builds a config from a JSON-like document whose optional
    /// `overrides` table maps dotted keys to values.
    pub fn from_value(mut doc: Value) -> Result<Self> {
        let overrides = doc.as_object_mut().and_then(|o| o.remove("overrides"));
        let mut base = serde_json::to_value(Self::default())?;
        merge(&mut base, doc);
        if let Some(Value::Object(map)) = overrides {
            for (key, val) in map {
                set_dotted(&mut base, &key, val)?;
            }
        }
        let mut cfg: Self = serde_json::from_value(base)?;
        cfg.slope.prepare();
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Sets `a.b.c` inside `base`, refusing keys that do not exist.
pub fn set_dotted(base: &mut Value, key: &str, val: Value) -> Result<()> {
    let mut cur = base;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::InvalidSpec(format!("override '{key}': '{part}' is not a table")))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*part) {
                return Err(Error::InvalidSpec(format!("unknown override key '{key}'")));
            }
            obj.insert((*part).to_string(), val);
            return Ok(());
        }
        cur = obj
            .get_mut(*part)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown override key '{key}'")))?;
    }
    Ok(())
}
