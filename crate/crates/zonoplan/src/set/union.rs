//! Union of polytopes as a hybrid zonotope with one binary indicator
//! per part.
//!
//! Construction: with parts given as constrained zonotopes
//! `<G_i, c_i, A_i, b_i>` and indicators `delta_i`,
//!
//! ```text
//!   x = sum_i (G_i xi_i + c_i delta_i)
//!   A_i xi_i = b_i delta_i
//!   xi_{i,j} + s_{i,j} = delta_i     (one slack per continuous factor)
//!   sum_i delta_i = 1,  delta binary
//! ```
//!
//! When `delta_i = 0`, the slack rows pin `xi_i = 0`, so part `i`
//! contributes nothing; when `delta_i = 1`, `xi_i` ranges over `[0,1]`
//! and the decoded point is exactly a point of part `i`. Only equality
//! constraints and `[0,1]`/`{0,1}` factors appear, and `delta_i` is a
//! true region indicator.

use nalgebra::DVector;

use crate::num::lp::{LinearProgram, LpError};
use crate::num::sparse::SpMat;
use crate::set::base::{ConstrainedZonotope, HPolytope};
use crate::set::hybrid::HybridZonotope;
use crate::set::{SetError, SetResult};

/// Union of H-rep polytopes. Each part must be nonempty and bounded;
/// violations are reported with the offending index.
pub fn union_of_polytopes(parts: &[HPolytope]) -> SetResult<HybridZonotope> {
    if parts.is_empty() {
        return Err(SetError::EmptyUnion);
    }
    let mut czs = Vec::with_capacity(parts.len());
    for (index, part) in parts.iter().enumerate() {
        let cz = part.to_constrained_zonotope().map_err(|e| match e {
            SetError::Lp(LpError::Infeasible) => SetError::EmptyPart { index },
            SetError::Lp(LpError::Unbounded) => SetError::UnboundedPart { index },
            other => other,
        })?;
        czs.push(cz);
    }
    union_of_constrained_zonotopes(&czs)
}

/// Union of constrained zonotopes (the native form of the
/// construction). Parts are bounded by construction; emptiness is
/// probed with an LP over the factor box.
pub fn union_of_constrained_zonotopes(parts: &[ConstrainedZonotope]) -> SetResult<HybridZonotope> {
    if parts.is_empty() {
        return Err(SetError::EmptyUnion);
    }
    let dim = parts[0].dim();
    for (index, p) in parts.iter().enumerate() {
        if p.dim() != dim {
            return Err(SetError::DimMismatch {
                context: format!("union part {index}"),
                expected: dim,
                got: p.dim(),
            });
        }
        if p.num_cons() > 0 {
            let bounds = vec![(0.0, 1.0); p.num_gens()];
            let lp = LinearProgram {
                num_vars: p.num_gens(),
                ineq: None,
                eq: Some((&p.con_matrix, &p.con_rhs)),
                bounds: Some(&bounds),
            };
            if lp.feasible_point().is_err() {
                return Err(SetError::EmptyPart { index });
            }
        }
    }

    let n_parts = parts.len();
    let total_gens: usize = parts.iter().map(|p| p.num_gens()).sum();
    let n_g = 2 * total_gens; // xi blocks plus slack blocks
    let n_c: usize = parts.iter().map(|p| p.num_cons() + p.num_gens()).sum::<usize>() + 1;

    // Continuous factor layout: [xi_0, s_0, xi_1, s_1, ...].
    let mut gc = Vec::new();
    let mut gb = Vec::new();
    let mut ac = Vec::new();
    let mut ab = Vec::new();
    let mut rhs = vec![0.0; n_c];

    let mut col = 0;
    let mut row = 0;
    for (i, p) in parts.iter().enumerate() {
        let ng_i = p.num_gens();
        let xi0 = col;
        let s0 = col + ng_i;
        col += 2 * ng_i;

        // Generator block: G_i over xi_i columns.
        for (r, c, v) in p.generators.triplets() {
            gc.push((r, xi0 + c, v));
        }
        // Binary generator column i = c_i.
        for r in 0..dim {
            if p.center[r] != 0.0 {
                gb.push((r, i, p.center[r]));
            }
        }
        // A_i xi_i - b_i delta_i = 0.
        for (r, c, v) in p.con_matrix.triplets() {
            ac.push((row + r, xi0 + c, v));
        }
        for r in 0..p.num_cons() {
            if p.con_rhs[r] != 0.0 {
                ab.push((row + r, i, -p.con_rhs[r]));
            }
        }
        row += p.num_cons();
        // xi_{i,j} + s_{i,j} - delta_i = 0.
        for j in 0..ng_i {
            ac.push((row + j, xi0 + j, 1.0));
            ac.push((row + j, s0 + j, 1.0));
            ab.push((row + j, i, -1.0));
        }
        row += ng_i;
    }
    // sum_i delta_i = 1.
    for i in 0..n_parts {
        ab.push((row, i, 1.0));
    }
    rhs[row] = 1.0;

    HybridZonotope::new(
        SpMat::from_triplets(dim, n_g, &gc),
        SpMat::from_triplets(dim, n_parts, &gb),
        DVector::zeros(dim),
        SpMat::from_triplets(n_c, n_g, &ac),
        SpMat::from_triplets(n_c, n_parts, &ab),
        DVector::from_vec(rhs),
    )
}

/// Factor assignment placing `x` in part `part_idx` of a union built by
/// [`union_of_constrained_zonotopes`], given the part-local continuous
/// factors `xi` with `G_i xi + c_i = x`. Returns `(cont, bin)` factors
/// of the union set.
pub fn union_witness(
    parts: &[ConstrainedZonotope],
    part_idx: usize,
    xi: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let total_gens: usize = parts.iter().map(|p| p.num_gens()).sum();
    let mut cont = DVector::zeros(2 * total_gens);
    let mut col = 0;
    for (i, p) in parts.iter().enumerate() {
        let ng_i = p.num_gens();
        if i == part_idx {
            for j in 0..ng_i {
                cont[col + j] = xi[j];
                cont[col + ng_i + j] = 1.0 - xi[j];
            }
        }
        col += 2 * ng_i;
    }
    let mut bin = DVector::zeros(parts.len());
    bin[part_idx] = 1.0;
    (cont, bin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::set::hybrid::FactorPoint;
    use crate::set::Zonotope;

    #[test]
    fn singleton_union_of_box() {
        let part = HPolytope::from_box(&[0.0, 0.0], &[1.0, 1.0]);
        let u = union_of_polytopes(&[part]).unwrap();
        assert_eq!(u.num_bin_gens(), 1);
        let (lo, hi) = u.interval_hull();
        assert!(lo.amax() <= 1e-12);
        assert!((hi[0] - 1.0).abs() < 1e-9 && (hi[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_part_reported_with_index() {
        let good = HPolytope::from_box(&[0.0], &[1.0]);
        let l = SpMat::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, -1.0)]);
        let bad = HPolytope::inequalities(l, DVector::from_vec(vec![-1.0, -1.0])).unwrap();
        let err = union_of_polytopes(&[good, bad]).unwrap_err();
        match err {
            SetError::EmptyPart { index } => assert_eq!(index, 1),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unbounded_part_reported() {
        let l = SpMat::from_triplets(1, 1, &[(0, 0, 1.0)]);
        let bad = HPolytope::inequalities(l, DVector::from_vec(vec![1.0])).unwrap();
        let err = union_of_polytopes(&[bad]).unwrap_err();
        assert!(matches!(err, SetError::UnboundedPart { index: 0 }));
    }

    #[test]
    fn witness_decodes_into_part() {
        // Two disjoint intervals [0,1] and [2,3].
        let p1: ConstrainedZonotope = Zonotope::from_box(&[0.0], &[1.0]).into();
        let p2: ConstrainedZonotope = Zonotope::from_box(&[2.0], &[3.0]).into();
        let parts = vec![p1, p2];
        let u = union_of_constrained_zonotopes(&parts).unwrap();
        assert_eq!(u.num_bin_gens(), 2);
        // 0.5 in part 0 with xi = 0.5.
        let (cont, bin) = union_witness(&parts, 0, &DVector::from_vec(vec![0.5]));
        let fp = FactorPoint::new(cont, bin);
        let x = u.decode(&fp);
        assert!((x[0] - 0.5).abs() < 1e-12);
        assert!(u.constraint_residual(&fp) < 1e-12);
        // 2.5 in part 1 with xi = 0.5.
        let (cont, bin) = union_witness(&parts, 1, &DVector::from_vec(vec![0.5]));
        let fp = FactorPoint::new(cont, bin);
        assert!((u.decode(&fp)[0] - 2.5).abs() < 1e-12);
        assert!(u.constraint_residual(&fp) < 1e-12);
    }
}
