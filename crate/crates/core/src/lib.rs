//! Low-rank augmented Lagrangian solver for semidefinite programs.
//!
//! The primal matrix of every block is factored as `X = V^T V` and updated one
//! column at a time with a limited-memory quasi-Newton method. Multipliers and
//! the penalty parameter are updated once per sweep. All numeric code is
//! generic over [`Real`], so a binary64 solve can be refined in double-double
//! arithmetic from its warm start.

pub mod auglag;
pub mod dd;
pub mod inner;
pub mod instances;
pub mod io;
pub mod linops;
pub mod precision;
pub mod problem;
pub mod scalar;
pub mod solver;

pub use dd::DoubleDouble;
pub use problem::{Constraint, ObjectiveReport, SdpProblem, SymMatrix};
pub use scalar::{Real, ScalarKind};
pub use solver::{solve, ErrorReport, Solution, SolverOptions, Status, WarmStart};
