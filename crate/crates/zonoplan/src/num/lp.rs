//! Thin LP layer over the `minilp` simplex solver.
//!
//! Used for the geometric probes: polytope emptiness and boundedness,
//! interval hulls of H-rep polytopes, and strict-interior overlap tests
//! between regions.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use nalgebra::DVector;
use thiserror::Error;

use crate::num::sparse::SpMat;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("LP infeasible")]
    Infeasible,
    #[error("LP unbounded")]
    Unbounded,
    #[error("LP solver failure: {0}")]
    Solver(String),
}

pub type LpResult<T> = Result<T, LpError>;

/// Linear program `optimize c^T x` over `L x <= r`, `A x = b`,
/// with optional per-variable bounds (`None` entries are free).
pub struct LinearProgram<'a> {
    pub num_vars: usize,
    pub ineq: Option<(&'a SpMat, &'a DVector<f64>)>,
    pub eq: Option<(&'a SpMat, &'a DVector<f64>)>,
    pub bounds: Option<&'a [(f64, f64)]>,
}

impl<'a> LinearProgram<'a> {
    fn build(&self, objective: &[f64], dir: OptimizationDirection) -> (Problem, Vec<Variable>) {
        let mut prob = Problem::new(dir);
        let vars: Vec<Variable> = (0..self.num_vars)
            .map(|i| {
                let (lo, hi) = self
                    .bounds
                    .map(|b| b[i])
                    .unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
                prob.add_var(objective[i], (lo, hi))
            })
            .collect();
        if let Some((l, r)) = self.ineq {
            for i in 0..l.nrows() {
                let expr: Vec<(Variable, f64)> = l.row(i).map(|(j, v)| (vars[j], v)).collect();
                prob.add_constraint(expr, ComparisonOp::Le, r[i]);
            }
        }
        if let Some((a, b)) = self.eq {
            for i in 0..a.nrows() {
                let expr: Vec<(Variable, f64)> = a.row(i).map(|(j, v)| (vars[j], v)).collect();
                prob.add_constraint(expr, ComparisonOp::Eq, b[i]);
            }
        }
        (prob, vars)
    }

    /// Optimize `c^T x`; returns the optimal value and a solution point.
    pub fn optimize(
        &self,
        objective: &[f64],
        dir: OptimizationDirection,
    ) -> LpResult<(f64, DVector<f64>)> {
        let (prob, vars) = self.build(objective, dir);
        match prob.solve() {
            Ok(sol) => {
                let x = DVector::from_iterator(vars.len(), vars.iter().map(|v| sol[*v]));
                Ok((sol.objective(), x))
            }
            Err(minilp::Error::Infeasible) => Err(LpError::Infeasible),
            Err(minilp::Error::Unbounded) => Err(LpError::Unbounded),
        }
    }

    pub fn minimize(&self, objective: &[f64]) -> LpResult<(f64, DVector<f64>)> {
        self.optimize(objective, OptimizationDirection::Minimize)
    }

    pub fn maximize(&self, objective: &[f64]) -> LpResult<(f64, DVector<f64>)> {
        self.optimize(objective, OptimizationDirection::Maximize)
    }

    /// Feasibility probe (zero objective).
    pub fn feasible_point(&self) -> LpResult<DVector<f64>> {
        let c = vec![0.0; self.num_vars];
        self.minimize(&c).map(|(_, x)| x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_lp() {
        let l = SpMat::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]);
        let r = DVector::from_vec(vec![2.0, 3.0]);
        let lp = LinearProgram {
            num_vars: 2,
            ineq: Some((&l, &r)),
            eq: None,
            bounds: Some(&[(0.0, f64::INFINITY), (0.0, f64::INFINITY)]),
        };
        let (v, x) = lp.maximize(&[1.0, 1.0]).unwrap();
        assert!((v - 5.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        let l = SpMat::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, -1.0)]);
        let r = DVector::from_vec(vec![-1.0, -1.0]); // x <= -1 and x >= 1
        let lp = LinearProgram {
            num_vars: 1,
            ineq: Some((&l, &r)),
            eq: None,
            bounds: None,
        };
        assert!(matches!(lp.feasible_point(), Err(LpError::Infeasible)));
    }

    #[test]
    fn unbounded_detected() {
        let lp = LinearProgram {
            num_vars: 1,
            ineq: None,
            eq: None,
            bounds: None,
        };
        assert!(matches!(lp.maximize(&[1.0]), Err(LpError::Unbounded)));
    }
}
