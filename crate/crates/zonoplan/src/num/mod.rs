//! Numeric workhorses shared by the set and solver modules: sparse
//! matrices, a thin LP layer, and the ADMM box-QP engine.

pub mod boxqp;
pub mod lp;
pub mod sparse;
