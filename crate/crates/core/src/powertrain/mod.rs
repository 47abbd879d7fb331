//! Engine map, gear policy, exact fuel rate and the fitted fuel model.

pub mod engine_map;
pub mod fit;
pub mod fuel;
pub mod gear;

pub use engine_map::{build_engine_map, EngineMap, MapSpec};
pub use fit::{eco_fit, fit_fuel_model, holdout_split, prediction_accuracy, sample_policy, FitReport, FitSample};
pub use fuel::FuelCoeffs;
pub use gear::{engine_state, fuel_rate_exact, optimize_gear_policy, GearPolicy, Lattice, Transmission};
