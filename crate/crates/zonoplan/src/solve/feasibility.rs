//! Mixed-integer feasibility path used by the containment oracle when
//! binary enumeration is out of budget: minimize the squared distance
//! of the decoded point to the query over the set's constraints, by
//! branch and bound, stopping as soon as the distance certifies the
//! answer either way.

use nalgebra::DVector;

use crate::num::sparse::SpMat;
use crate::set::{
    ContainsOutcome, ContainsSettings, FactorPoint, HybridZonotope, SetError, SetResult,
};
use crate::solve::bnb::{solve_factor_bnb, BnbOptions, FactorProblem, SolveStatus};

pub fn decide_membership(
    z: &HybridZonotope,
    x: &DVector<f64>,
    settings: &ContainsSettings,
) -> SetResult<ContainsOutcome> {
    // minimize |G xi + c - x|_2^2 over the set's factor constraints.
    let g = SpMat::hstack(&[z.cont_generators(), z.bin_generators()]);
    let rhs = x - z.center();
    let gt = g.transpose();
    let p = gt.matmul(&g).scale(2.0);
    let q = g.tr_matvec(&rhs).scale(-2.0);
    let a = SpMat::hstack(&[z.con_cont(), z.con_bin()]);
    let prob = FactorProblem {
        p,
        q,
        a,
        b: z.con_rhs().clone(),
        obj_const: rhs.dot(&rhs),
        n_cont: z.num_cont_gens(),
        n_bin: z.num_bin_gens(),
    };
    let tol = settings.tol;
    let opts = BnbOptions {
        gap: 1e-6,
        node_budget: 50_000,
        target_objective: Some(0.25 * tol * tol),
        ..Default::default()
    };
    let report =
        solve_factor_bnb(&prob, &opts).map_err(|e| SetError::Shape(format!("feasibility: {e}")))?;

    if let Some(fp) = &report.incumbent {
        let fp = FactorPoint::new(fp.cont.clone(), fp.bin.clone());
        let decoded = z.decode(&fp);
        if (x - &decoded).amax() <= tol && z.constraint_residual(&fp) <= settings.eps_eq {
            return Ok(ContainsOutcome::Contained(fp));
        }
    }
    if report.status == SolveStatus::Infeasible {
        return Ok(ContainsOutcome::NotContained);
    }
    // Distances with infinity norm <= tol have squared 2-norm at most
    // dim * tol^2; a larger certified bound excludes membership.
    let exclusion = z.dim() as f64 * tol * tol;
    if report.bound > exclusion {
        return Ok(ContainsOutcome::NotContained);
    }
    Err(SetError::UndecidableAtBudget {
        budget: settings.bin_budget,
        n_b: z.num_bin_gens(),
    })
}
