//! Trajectory refinement as a sparse nonlinear program.

pub mod band;
pub mod constraints;
pub mod gradcheck;
pub mod ipm;
pub mod problem;

pub use constraints::{acc_constraints, acc_spacing, gap_spec, AccParams, AccVariant, LeadPrediction};
pub use gradcheck::{check_gradients, random_bvp, GradReport};
pub use ipm::{solve, IpmOptions, Nlp, Solution, SolveStats, Status};
pub use problem::{build_problem, ConstraintSpec, EmatoProblem, ProblemDump, SpecKind, NV};
