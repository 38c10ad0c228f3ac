//! Motion planning under metric temporal logic (MTL) specifications.
//!
//! The pipeline represented by this crate:
//!
//! 1. [`set`] — zonotopes, constrained zonotopes, hybrid zonotopes, and
//!    H-rep polytopes in the `[0,1]` / `{0,1}` factor basis, with the
//!    closed-form operations (affine map, Cartesian product, Minkowski
//!    sum, generalized intersection, union of polytopes) everything else
//!    builds on.
//! 2. [`mtl`] — an MTL formula AST with exact finite-trace semantics and
//!    H-rep polytope encodings of every operator over the binary region
//!    indicators.
//! 3. [`reach`] — maps (unions of labeled regions with exposed binary
//!    indicators and region-dependent disturbances), lifted forward
//!    reachability, and intersection of the lifted set with compiled
//!    MTL polytopes.
//! 4. [`solve`] — MIQP assembly over the lifted set, a branch-and-bound
//!    solver with ADMM QP relaxations, a brute-force oracle, and MPS
//!    export/import.

pub mod mtl;
pub mod num;
pub mod reach;
pub mod set;
pub mod solve;
pub mod testkit;

pub use num::sparse::SpMat;
