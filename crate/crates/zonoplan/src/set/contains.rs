//! Point containment for hybrid zonotopes.
//!
//! Small binary counts are decided by enumerating binary assignments
//! (with one-hot pruning) and solving a box-constrained least-distance
//! QP per assignment. Larger sets fall back to the mixed-integer
//! feasibility path of the solver module. A returned witness always
//! decodes back to the query point within tolerance.

use nalgebra::DVector;

use crate::num::boxqp::{AdmmSettings, AffineProjector, QpInstance, QpStatus, QpWorkspace};
use crate::num::sparse::SpMat;
use crate::set::hybrid::{FactorPoint, HybridZonotope};
use crate::set::{SetError, SetResult, EPS_EQ, TOL_CONTAINS};

#[derive(Debug, Clone, Copy)]
pub struct ContainsSettings {
    /// Point-distance tolerance.
    pub tol: f64,
    /// Equality-constraint residual tolerance.
    pub eps_eq: f64,
    /// Enumerate binaries only when `n_b` is at most this.
    pub bin_budget: usize,
    /// Hard cap on enumerated assignments.
    pub max_assignments: usize,
}

impl Default for ContainsSettings {
    fn default() -> Self {
        Self {
            tol: TOL_CONTAINS,
            eps_eq: EPS_EQ,
            bin_budget: 20,
            max_assignments: 1 << 20,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ContainsOutcome {
    Contained(FactorPoint),
    NotContained,
}

impl ContainsOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, ContainsOutcome::Contained(_))
    }

    pub fn witness(&self) -> Option<&FactorPoint> {
        match self {
            ContainsOutcome::Contained(fp) => Some(fp),
            ContainsOutcome::NotContained => None,
        }
    }
}

/// Reusable containment oracle for one set: the per-assignment QP
/// workspace is factorized once and shared across queries.
pub struct ContainmentOracle<'a> {
    z: &'a HybridZonotope,
    settings: ContainsSettings,
    qp: QpWorkspace,
    stack: SpMat,
    projector: Option<AffineProjector>,
    groups: Vec<Vec<usize>>,
    free_bins: Vec<usize>,
    hull: (DVector<f64>, DVector<f64>),
    /// Rowwise range of `Gc xi` over the unit box, for per-assignment
    /// hull prefilters.
    cont_range: (DVector<f64>, DVector<f64>),
}

impl<'a> ContainmentOracle<'a> {
    pub fn new(z: &'a HybridZonotope, settings: ContainsSettings) -> SetResult<Self> {
        // Joint least-squares over continuous factors for a fixed
        // binary assignment: minimize |Ac xi - rhs_eq|^2 +
        // |Gc xi - rhs_pt|^2 over the factor box. Folding the equality
        // rows into the objective keeps the splitting well conditioned
        // even on thin feasible sets; the witness is afterwards
        // projected back onto the equality rows exactly.
        let m = SpMat::vstack(&[z.con_cont(), z.cont_generators()]);
        let mt = m.transpose();
        let p = mt.matmul(&m).scale(2.0);
        let admm = AdmmSettings {
            eps_abs: 1e-9,
            eps_rel: 1e-9,
            ..Default::default()
        };
        let qp = QpWorkspace::new(p, SpMat::zeros(0, z.num_cont_gens()), admm)?;
        let projector = if z.num_constraints() > 0 {
            Some(AffineProjector::new(z.con_cont().clone())?)
        } else {
            None
        };
        let groups = z.one_hot_groups();
        let grouped: std::collections::HashSet<usize> =
            groups.iter().flatten().copied().collect();
        let free_bins: Vec<usize> = (0..z.num_bin_gens())
            .filter(|i| !grouped.contains(i))
            .collect();
        Ok(Self {
            hull: z.interval_hull(),
            cont_range: z.cont_generators().row_ranges_unit_box(),
            z,
            settings,
            qp,
            stack: m,
            projector,
            groups,
            free_bins,
        })
    }

    fn assignment_count(&self) -> usize {
        let mut total: usize = 1;
        for g in &self.groups {
            total = total.saturating_mul(g.len());
        }
        total.saturating_mul(1usize << self.free_bins.len().min(63))
    }

    /// Decide membership of `x`.
    pub fn contains(&self, x: &DVector<f64>) -> SetResult<ContainsOutcome> {
        let z = self.z;
        if x.len() != z.dim() {
            return Err(SetError::DimMismatch {
                context: "contains query point".into(),
                expected: z.dim(),
                got: x.len(),
            });
        }
        let tol = self.settings.tol;
        // Interval-hull prefilter: a necessary condition for membership.
        for i in 0..x.len() {
            if x[i] < self.hull.0[i] - tol || x[i] > self.hull.1[i] + tol {
                return Ok(ContainsOutcome::NotContained);
            }
        }

        if z.num_bin_gens() > self.settings.bin_budget
            || self.assignment_count() > self.settings.max_assignments
        {
            return crate::solve::feasibility::decide_membership(z, x, &self.settings);
        }

        let mut delta = DVector::zeros(z.num_bin_gens());
        let mut found: Option<FactorPoint> = None;
        self.enumerate(x, 0, &mut delta, &mut found)?;
        Ok(match found {
            Some(fp) => ContainsOutcome::Contained(fp),
            None => ContainsOutcome::NotContained,
        })
    }

    fn enumerate(
        &self,
        x: &DVector<f64>,
        level: usize,
        delta: &mut DVector<f64>,
        found: &mut Option<FactorPoint>,
    ) -> SetResult<()> {
        if found.is_some() {
            return Ok(());
        }
        if level < self.groups.len() {
            for &idx in &self.groups[level] {
                delta[idx] = 1.0;
                self.enumerate(x, level + 1, delta, found)?;
                delta[idx] = 0.0;
                if found.is_some() {
                    return Ok(());
                }
            }
            return Ok(());
        }
        let free_level = level - self.groups.len();
        if free_level < self.free_bins.len() {
            let idx = self.free_bins[free_level];
            for v in [0.0, 1.0] {
                delta[idx] = v;
                self.enumerate(x, level + 1, delta, found)?;
                if found.is_some() {
                    return Ok(());
                }
            }
            delta[idx] = 0.0;
            return Ok(());
        }
        if let Some(fp) = self.try_assignment(x, delta)? {
            *found = Some(fp);
        }
        Ok(())
    }

    fn try_assignment(
        &self,
        x: &DVector<f64>,
        delta: &DVector<f64>,
    ) -> SetResult<Option<FactorPoint>> {
        let z = self.z;
        let n_g = z.num_cont_gens();
        let n_c = z.num_constraints();
        let rhs_eq = z.con_rhs() - z.con_bin().matvec(delta);
        let rhs_pt = x - z.center() - z.bin_generators().matvec(delta);
        // Per-assignment hull prefilter: `Gc xi` must be able to reach
        // `rhs_pt` coordinatewise.
        let tol = self.settings.tol;
        for i in 0..z.dim() {
            if rhs_pt[i] < self.cont_range.0[i] - tol || rhs_pt[i] > self.cont_range.1[i] + tol {
                return Ok(None);
            }
        }
        let v = DVector::from_iterator(n_c + z.dim(), rhs_eq.iter().chain(rhs_pt.iter()).copied());
        let q = self.stack.tr_matvec(&v).scale(-2.0);
        let lo = DVector::zeros(n_g);
        let hi = DVector::from_element(n_g, 1.0);
        let empty_b = DVector::zeros(0);
        let sol = self.qp.solve(
            &QpInstance {
                q: &q,
                b: &empty_b,
                lo: &lo,
                hi: &hi,
                obj_const: v.dot(&v),
            },
            None,
        );
        if sol.status == QpStatus::PrimalInfeasible {
            return Ok(None);
        }
        // Project the factors onto the equality rows so a returned
        // witness satisfies the constraints to near machine precision
        // (decoded dynamics residuals inherit this accuracy).
        let xi = match &self.projector {
            Some(p) => p.refine(&sol.x, &rhs_eq, &lo, &hi, 1e-12, 300).0,
            None => sol.x,
        };
        let fp = FactorPoint::new(xi, delta.clone());
        let decoded = z.decode(&fp);
        let dist = (x - &decoded).amax();
        let con_res = z.constraint_residual(&fp);
        if dist <= self.settings.tol && con_res <= self.settings.eps_eq {
            Ok(Some(fp))
        } else {
            Ok(None)
        }
    }
}

impl HybridZonotope {
    /// Build a reusable containment oracle for this set.
    pub fn containment_oracle(&self, settings: ContainsSettings) -> SetResult<ContainmentOracle<'_>> {
        ContainmentOracle::new(self, settings)
    }

    /// One-shot containment check at tolerance `tol`.
    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> SetResult<ContainsOutcome> {
        let settings = ContainsSettings {
            tol,
            ..Default::default()
        };
        self.containment_oracle(settings)?.contains(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::sparse::SpMat;
    use crate::set::union::{union_of_constrained_zonotopes, union_witness};
    use crate::set::{ConstrainedZonotope, HPolytope, Zonotope};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn center_of_constraint_free_zonotope() {
        let z = HybridZonotope::from_box(&[0.0, 0.0], &[2.0, 4.0]);
        let out = z.contains_point(&dv(&[1.0, 2.0]), 1e-6).unwrap();
        assert!(out.holds());
        let fp = out.witness().unwrap();
        assert!((z.decode(fp) - dv(&[1.0, 2.0])).amax() < 1e-6);
    }

    #[test]
    fn hull_prefilter_rejects() {
        let z = HybridZonotope::from_box(&[0.0], &[1.0]);
        assert!(!z.contains_point(&dv(&[2.0]), 1e-6).unwrap().holds());
    }

    #[test]
    fn unit_square_halfspace_intersection() {
        let z = HybridZonotope::from_box(&[0.0, 0.0], &[1.0, 1.0]);
        let l = SpMat::from_triplets(1, 2, &[(0, 0, 1.0)]);
        let h = HPolytope::inequalities(l, dv(&[0.5])).unwrap();
        let zi = z
            .generalized_intersection_hz(&SpMat::identity(2), &h)
            .unwrap();
        assert!(zi.contains_point(&dv(&[0.25, 0.5]), 1e-6).unwrap().holds());
        assert!(!zi.contains_point(&dv(&[0.75, 0.5]), 1e-6).unwrap().holds());
    }

    #[test]
    fn disjoint_interval_union_membership() {
        let p1: ConstrainedZonotope = Zonotope::from_box(&[0.0], &[1.0]).into();
        let p2: ConstrainedZonotope = Zonotope::from_box(&[2.0], &[3.0]).into();
        let u = union_of_constrained_zonotopes(&[p1, p2]).unwrap();
        let out = u.contains_point(&dv(&[0.5]), 1e-6).unwrap();
        assert!(out.holds());
        let fp = out.witness().unwrap();
        assert!((fp.bin[0] - 1.0).abs() < 1e-9 && fp.bin[1].abs() < 1e-9);
        assert!(!u.contains_point(&dv(&[1.5]), 1e-6).unwrap().holds());
        let out = u.contains_point(&dv(&[2.5]), 1e-6).unwrap();
        assert!((out.witness().unwrap().bin[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn overlapping_boxes_never_both_indicators() {
        // Two overlapping unit boxes shifted by 0.5.
        let p1: ConstrainedZonotope = Zonotope::from_box(&[0.0], &[1.0]).into();
        let p2: ConstrainedZonotope = Zonotope::from_box(&[0.5], &[1.5]).into();
        let parts = vec![p1, p2];
        let u = union_of_constrained_zonotopes(&parts).unwrap();
        // A point in the overlap is contained under either one-hot
        // assignment.
        for part in 0..2 {
            let xi = if part == 0 { dv(&[0.75]) } else { dv(&[0.25]) };
            let (cont, bin) = union_witness(&parts, part, &xi);
            let fp = FactorPoint::new(cont, bin);
            assert!((u.decode(&fp)[0] - 0.75).abs() < 1e-12);
            assert!(u.constraint_residual(&fp) < 1e-12);
        }
        // delta = (1,1) violates the one-hot row.
        let (mut cont, mut bin) = union_witness(&parts, 0, &dv(&[0.75]));
        bin[1] = 1.0;
        cont[2] = 0.25;
        cont[3] = 0.75;
        let fp = FactorPoint::new(cont, bin);
        assert!(u.constraint_residual(&fp) > 0.5);
    }

    #[test]
    fn decode_roundtrip_random_factors() {
        let z = HybridZonotope::from_box(&[0.0, -1.0, 2.0], &[1.0, 1.0, 5.0]);
        let oracle = z.containment_oracle(ContainsSettings::default()).unwrap();
        let mut seed = 0x1234_5678_u64;
        let mut rnd = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64) / ((1u64 << 31) as f64)
        };
        for _ in 0..30 {
            let fp = FactorPoint::new(dv(&[rnd(), rnd(), rnd()]), dv(&[]));
            let x = z.decode(&fp);
            assert!(oracle.contains(&x).unwrap().holds(), "decoded point must be contained");
        }
    }
}
