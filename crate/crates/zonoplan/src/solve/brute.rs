//! Brute-force oracle: enumerate binary assignments (one-hot groups
//! collapse to a choice of active member) and solve the pinned convex
//! QP for each. Exact up to the QP subsolver tolerance.

use nalgebra::DVector;

use crate::num::boxqp::AdmmSettings;
use crate::set::FactorPoint;
use crate::solve::bnb::{BnbSolver, FactorProblem, NodeLog, SolveReport, SolveStatus};
use crate::solve::miqp::Miqp;
use crate::solve::{SolveError, SolveResult};

/// Enumerated assignment count: the product of one-hot group sizes
/// times `2^(ungrouped binaries)`.
fn assignment_count(prob: &FactorProblem, groups: &[Vec<usize>]) -> u128 {
    let grouped: usize = groups.iter().map(|g| g.len()).sum();
    let free = prob.n_bin - grouped;
    let mut count: u128 = 1u128 << free.min(127);
    for g in groups {
        count = count.saturating_mul(g.len() as u128);
    }
    count
}

/// Exhaustive solve. Refuses when the enumeration would exceed
/// `2^bin_budget` assignments.
pub fn solve_factor_bruteforce(
    prob: &FactorProblem,
    bin_budget: usize,
) -> SolveResult<SolveReport> {
    let start = std::time::Instant::now();
    let solver = BnbSolver::new(prob, AdmmSettings::default())?;
    let groups: Vec<Vec<usize>> = solver.one_hot_groups().to_vec();
    let count = assignment_count(prob, &groups);
    if count > (1u128 << bin_budget.min(127)) {
        return Err(SolveError::BudgetExceeded {
            assignments: count,
            budget: bin_budget,
        });
    }

    let m = prob.num_factors();
    let grouped: std::collections::HashSet<usize> = groups.iter().flatten().copied().collect();
    let free: Vec<usize> = (prob.n_cont..m).filter(|j| !grouped.contains(j)).collect();

    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut lo = DVector::zeros(m);
    let mut hi = DVector::from_element(m, 1.0);
    let mut evaluated = 0usize;

    // Depth-first enumeration over group choices then free binaries.
    fn recurse(
        solver: &BnbSolver,
        groups: &[Vec<usize>],
        free: &[usize],
        level: usize,
        lo: &mut DVector<f64>,
        hi: &mut DVector<f64>,
        best: &mut Option<(f64, DVector<f64>)>,
        evaluated: &mut usize,
    ) {
        if level < groups.len() {
            let cols = groups[level].clone();
            for &sel in &cols {
                for &c in &cols {
                    let v = if c == sel { 1.0 } else { 0.0 };
                    lo[c] = v;
                    hi[c] = v;
                }
                recurse(solver, groups, free, level + 1, lo, hi, best, evaluated);
            }
            for &c in &cols {
                lo[c] = 0.0;
                hi[c] = 1.0;
            }
            return;
        }
        let f = level - groups.len();
        if f < free.len() {
            let j = free[f];
            for v in [0.0, 1.0] {
                lo[j] = v;
                hi[j] = v;
                recurse(solver, groups, free, level + 1, lo, hi, best, evaluated);
            }
            lo[j] = 0.0;
            hi[j] = 1.0;
            return;
        }
        *evaluated += 1;
        if let Some((obj, x)) = solver.try_leaf(lo, hi, None) {
            if best.as_ref().map(|(b, _)| obj < b - 1e-12).unwrap_or(true) {
                *best = Some((obj, x));
            }
        }
    }

    recurse(
        &solver,
        &groups,
        &free,
        0,
        &mut lo,
        &mut hi,
        &mut best,
        &mut evaluated,
    );

    let report = match best {
        Some((obj, x)) => {
            let cont = DVector::from_iterator(prob.n_cont, x.iter().take(prob.n_cont).copied());
            let bin = DVector::from_iterator(
                prob.n_bin,
                x.iter().skip(prob.n_cont).map(|v| v.round()),
            );
            SolveReport {
                incumbent: Some(FactorPoint::new(cont, bin)),
                objective: obj,
                bound: obj,
                gap: 0.0,
                nodes: evaluated,
                wall_time: start.elapsed(),
                status: SolveStatus::OptimalAtGap,
                log: vec![NodeLog {
                    node: 0,
                    parent: None,
                    depth: 0,
                    bound: obj,
                    incumbent: obj,
                    gap: 0.0,
                }],
            }
        }
        None => SolveReport {
            incumbent: None,
            objective: f64::INFINITY,
            bound: f64::INFINITY,
            gap: f64::INFINITY,
            nodes: evaluated,
            wall_time: start.elapsed(),
            status: SolveStatus::Infeasible,
            log: Vec::new(),
        },
    };
    Ok(report)
}

/// Brute-force solve of an assembled MIQP.
pub fn solve_bruteforce(miqp: &Miqp, bin_budget: usize) -> SolveResult<SolveReport> {
    let prob = miqp.factor_problem();
    solve_factor_bruteforce(&prob, bin_budget)
}
