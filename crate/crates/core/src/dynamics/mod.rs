//! Longitudinal dynamics and road grade.

pub mod slope;
pub mod vehicle;

pub use slope::{make_slope_profile, predict_slope, SlopeKind, SlopeProfile};
pub use vehicle::{integrate_state, resistance_accel, traction_accel, KinState, Limits, VehicleParams};
