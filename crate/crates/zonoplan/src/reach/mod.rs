//! Maps with exposed binary indicators, region-dependent disturbances,
//! lifted forward reachability, and intersection of the lifted set
//! with compiled MTL operator polytopes.

mod lifted;
mod region;
pub mod system;

pub use lifted::{
    apply_mtl, build_lifted, forward_step, forward_step_naive, ComplexityBreakdown, LiftedIndex,
    LiftedReachSet, StateConstraint,
};
pub use region::{
    build_map, AugmentedMap, MapSchedule, MapValidation, PartitionKind, RegionRole, RegionSpec,
};
pub use system::LtiSystem;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReachError {
    #[error("map has no regions")]
    NoRegions,
    #[error("region `{id}` is empty")]
    RegionEmpty { id: String },
    #[error("region `{id}` is unbounded")]
    RegionUnbounded { id: String },
    #[error("regions `{a}` and `{b}` have overlapping interiors (witness {witness:?})")]
    DcpViolation {
        a: String,
        b: String,
        witness: Vec<f64>,
    },
    #[error("keep-out {index} overlaps region `{region}`")]
    KeepoutCovered { index: usize, region: String },
    #[error("workspace point {point:?} is covered by no region")]
    CoverageGap { point: Vec<f64> },
    #[error("region `{region}` constrains dimensions outside the coverage grid and tighter than the workspace box: {detail}")]
    CoverageRowUnsupported { region: String, detail: String },
    #[error("map schedule needs {expected} per-step maps, got {got}")]
    ScheduleLength { expected: usize, got: usize },
    #[error("time-varying maps must keep region count/identity fixed: step {step} differs ({detail})")]
    ScheduleMismatch { step: usize, detail: String },
    #[error("initial state lies in no map region; nearest is `{nearest}` at violation {violation:.6}")]
    InitialStateOutsideMap { nearest: String, violation: f64 },
    #[error("system/map mismatch: {0}")]
    SystemMismatch(String),
    #[error("clause coordinate (step {step}, region `{region}`) does not resolve in the lifted index")]
    UnresolvableCoordinate { step: usize, region: String },
    #[error(transparent)]
    Set(#[from] crate::set::SetError),
    #[error(transparent)]
    Lp(#[from] crate::num::lp::LpError),
}

pub type ReachResult<T> = Result<T, ReachError>;
