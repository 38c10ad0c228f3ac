//! Metric temporal logic: formula AST, exact finite-trace semantics
//! (the ground-truth oracle for every encoding test), and the H-rep
//! polytope encodings of each operator over binary region indicators.

mod encode;
mod formula;
mod parser;

pub use encode::{
    compile_cnf, encode_always, encode_and, encode_eventually, encode_or, encode_prop,
    encode_until, operator_equivalence_suite, ClauseKind, Literal, OperatorCheck,
    OperatorPolytope,
};
pub use formula::{conventional_until, evaluate, time_bound, MtlFormula, PropSet, PropTrace};
pub use parser::parse_formula;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MtlError {
    #[error("interval [{t1}, {t2}] is empty (t1 > t2)")]
    BadInterval { t1: usize, t2: usize },
    #[error("{op}[[{t1},{t2}]] evaluated at step {k} needs horizon {needed} but trace ends at {horizon}")]
    HorizonOverrun {
        op: &'static str,
        t1: usize,
        t2: usize,
        k: usize,
        needed: usize,
        horizon: usize,
    },
    #[error("unknown proposition `{0}`")]
    UnknownProp(String),
    #[error("unsupported clause for compilation: `{0}` (supported: literals, literal pairs under and/or, until/eventually/always over literals)")]
    UnsupportedClause(String),
    #[error("parse error at token {position}: {message}")]
    Parse { position: usize, message: String },
}

pub type MtlResult<T> = Result<T, MtlError>;
