//! MIQP assembly over lifted sets, branch-and-bound with convex QP
//! relaxations, a brute-force oracle, and MPS import/export.

pub mod bnb;
pub mod brute;
pub mod feasibility;
pub mod miqp;
pub mod mps;

pub use bnb::{solve_factor_bnb, BnbOptions, BnbSolver, FactorProblem, NodeLog, SolveReport, SolveStatus};
pub use brute::{solve_bruteforce, solve_factor_bruteforce};
pub use miqp::{assemble, decode, solve_bnb, Miqp, PlanSolution, ValidationCtx};
pub use mps::{export_mip, read_mps};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("{name} is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { name: &'static str, min_eig: f64 },
    #[error("{name} is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPd { name: &'static str, min_eig: f64 },
    #[error("enumeration of {assignments} assignments exceeds budget 2^{budget}")]
    BudgetExceeded { assignments: u128, budget: usize },
    #[error("decoded plan failed validation: {0}")]
    DecodeValidation(String),
    #[error("MPS parse error at line {line}: {message}")]
    MpsParse { line: usize, message: String },
    #[error(transparent)]
    Qp(#[from] crate::num::boxqp::QpError),
    #[error(transparent)]
    Mtl(#[from] crate::mtl::MtlError),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type SolveResult<T> = Result<T, SolveError>;
