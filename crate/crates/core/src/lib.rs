//! Energy-model-aware trajectory optimization.
//!
//! The crate is organised bottom-up: [`powertrain`] turns an engine map into
//! a smooth fuel-rate model, [`dynamics`] holds the longitudinal vehicle
//! model, [`polytraj`] generates and scores quintic candidates, [`optimizer`]
//! refines them with an interior-point NLP solve and [`scenarios`] closes
//! the loop over pulse-and-glide, ACC and multi-lane Frenet drives.

pub mod dynamics;
pub mod error;
pub mod optimizer;
pub mod polytraj;
pub mod powertrain;
pub mod scalar;
pub mod scenarios;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FuelCoeffsF32 = powertrain::FuelCoeffs<f32>;
pub type FuelCoeffsF64 = powertrain::FuelCoeffs<f64>;
pub type VehicleParamsF32 = dynamics::VehicleParams<f32>;
pub type VehicleParamsF64 = dynamics::VehicleParams<f64>;
pub type KinStateF32 = dynamics::KinState<f32>;
pub type KinStateF64 = dynamics::KinState<f64>;
pub type QuinticF32 = polytraj::Quintic<f32>;
pub type QuinticF64 = polytraj::Quintic<f64>;
pub type WeightsF32 = polytraj::Weights<f32>;
pub type WeightsF64 = polytraj::Weights<f64>;
pub type TrajectoryF32 = trajectory::Trajectory<f32>;
pub type TrajectoryF64 = trajectory::Trajectory<f64>;
pub type EmatoProblemF32 = optimizer::EmatoProblem<f32>;
pub type EmatoProblemF64 = optimizer::EmatoProblem<f64>;

