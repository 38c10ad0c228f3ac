//! Discrete-time LTI dynamics with region-dependent disturbances:
//! `x_{k+1} = A x_k + B u_k + W delta_k`.

use nalgebra::DVector;

use crate::num::sparse::SpMat;
use crate::reach::{ReachError, ReachResult};
use crate::set::HybridZonotope;

#[derive(Debug, Clone)]
pub struct LtiSystem {
    pub a: SpMat,
    pub b: SpMat,
    /// Disturbance matrix, one column per map region.
    pub w: SpMat,
    pub x0: DVector<f64>,
    /// Input sets per step; a single entry applies to every step.
    pub input_sets: Vec<HybridZonotope>,
}

impl LtiSystem {
    pub fn new(
        a: SpMat,
        b: SpMat,
        w: SpMat,
        x0: DVector<f64>,
        input_sets: Vec<HybridZonotope>,
    ) -> ReachResult<Self> {
        let n_x = a.nrows();
        if a.ncols() != n_x {
            return Err(ReachError::SystemMismatch(format!(
                "A is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n_x {
            return Err(ReachError::SystemMismatch(format!(
                "B has {} rows, expected {}",
                b.nrows(),
                n_x
            )));
        }
        if w.nrows() != n_x {
            return Err(ReachError::SystemMismatch(format!(
                "W has {} rows, expected {}",
                w.nrows(),
                n_x
            )));
        }
        if x0.len() != n_x {
            return Err(ReachError::SystemMismatch(format!(
                "x0 has length {}, expected {}",
                x0.len(),
                n_x
            )));
        }
        if input_sets.is_empty() {
            return Err(ReachError::SystemMismatch("no input sets".into()));
        }
        for (k, u) in input_sets.iter().enumerate() {
            if u.dim() != b.ncols() {
                return Err(ReachError::SystemMismatch(format!(
                    "input set {k} has dimension {}, B has {} columns",
                    u.dim(),
                    b.ncols()
                )));
            }
        }
        Ok(Self {
            a,
            b,
            w,
            x0,
            input_sets,
        })
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_regions(&self) -> usize {
        self.w.ncols()
    }

    pub fn input_at(&self, k: usize) -> &HybridZonotope {
        if self.input_sets.len() == 1 {
            &self.input_sets[0]
        } else {
            &self.input_sets[k]
        }
    }

    /// One dynamics step for a concrete input and indicator vector.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, delta: &DVector<f64>) -> DVector<f64> {
        self.a.matvec(x) + self.b.matvec(u) + self.w.matvec(delta)
    }

    /// Infinity-norm residual of the dynamics at a transition.
    pub fn residual(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        delta: &DVector<f64>,
        x_next: &DVector<f64>,
    ) -> f64 {
        (self.step(x, u, delta) - x_next).amax()
    }
}

/// Double integrator in the plane with unit time step: states
/// `[x, y, vx, vy]`, inputs `[ax, ay]`.
pub fn double_integrator(n_regions: usize) -> (SpMat, SpMat, SpMat) {
    let a = SpMat::from_triplets(
        4,
        4,
        &[
            (0, 0, 1.0),
            (0, 2, 1.0),
            (1, 1, 1.0),
            (1, 3, 1.0),
            (2, 2, 1.0),
            (3, 3, 1.0),
        ],
    );
    let b = SpMat::from_triplets(4, 2, &[(2, 0, 1.0), (3, 1, 1.0)]);
    let w = SpMat::zeros(4, n_regions);
    (a, b, w)
}
