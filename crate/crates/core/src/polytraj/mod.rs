//! Quintic candidates, Frenet geometry, feasibility and candidate scoring.

pub mod candidate;
pub mod feasibility;
pub mod frenet;
pub mod objective;
pub mod quintic;

pub use candidate::{build_candidate, to_path_trajectory, FrenetCandidate, PathMap};
pub use feasibility::{feasibility_check, AgentPrediction, Geometry, Verdict};
pub use frenet::{frenet_to_global, GlobalPose, ReferenceLine};
pub use objective::{evaluate_objective, select_candidate, select_index, Weights, EPS_V};
pub use quintic::{sample_1d_candidates, speed_grid_ends, Quintic};
