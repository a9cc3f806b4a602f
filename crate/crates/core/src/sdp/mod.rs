//! Semidefinite feasibility over named matrix variables.
//!
//! Equalities are eliminated before solving; the remaining LMI blocks are
//! pushed as far from the boundary as possible. [`check_solution`] re-derives
//! every residual from the assignment and the problem data only.

mod check;
mod presolve;
mod problem;
mod solve;

pub use check::{check_solution, FloorResidual, LmiResidual, ResidualReport};
pub use presolve::{presolve_eliminate, ReducedBlock, ReducedProblem, Recovery};
pub use problem::{LinearEquality, LmiBlock, LmiTerm, PsdFloor, SdpProblem, Triplet, Variable, VariableKind};
pub use solve::{solve, SdpSolution, SolveOptions, SolveStatus, SolverStats};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("variable {0} declared twice")]
    DuplicateName(String),
    #[error("reference to undeclared variable {0}")]
    UndeclaredVariable(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("equalities are inconsistent: row {row} keeps residual {residual:.3e}")]
    InconsistentEqualities { row: usize, residual: f64 },
    #[error("no assignment for variable {0}")]
    MissingAssignment(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
