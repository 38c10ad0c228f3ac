//! Set representations in the `[0,1]` / `{0,1}` factor basis: zonotopes,
//! constrained zonotopes, hybrid zonotopes, and H-rep polytopes, with
//! the closed-form operations and containment oracles used by the rest
//! of the pipeline.
//!
//! All set objects are immutable after construction and all operations
//! are pure functions, so they are safe to share across threads.

mod base;
mod contains;
mod hybrid;
pub(crate) mod union;

pub use base::{ConstrainedZonotope, HPolytope, Zonotope};
pub use contains::{ContainsOutcome, ContainsSettings};
pub use hybrid::{Complexity, FactorPoint, HybridZonotope};
pub use union::{union_of_constrained_zonotopes, union_of_polytopes, union_witness};

use thiserror::Error;

/// Default tolerance for equality-constraint satisfaction.
pub const EPS_EQ: f64 = 1e-8;
/// Default tolerance for point containment.
pub const TOL_CONTAINS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SetError {
    #[error("dimension mismatch: {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: String,
        expected: usize,
        got: usize,
    },
    #[error("inconsistent matrix shapes: {0}")]
    Shape(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("polytope {index} is empty")]
    EmptyPart { index: usize },
    #[error("polytope {index} is unbounded")]
    UnboundedPart { index: usize },
    #[error("union of zero polytopes")]
    EmptyUnion,
    #[error("containment undecidable at binary budget {budget} (set has {n_b} binary factors)")]
    UndecidableAtBudget { budget: usize, n_b: usize },
    #[error("LP probe failed: {0}")]
    Lp(#[from] crate::num::lp::LpError),
    #[error("numeric failure: {0}")]
    Numeric(#[from] crate::num::boxqp::QpError),
}

pub type SetResult<T> = Result<T, SetError>;
