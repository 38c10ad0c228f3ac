//! Map construction: labeled polytopic regions unioned into a hybrid
//! zonotope whose binary indicators are appended to the state vector.

use nalgebra::DVector;

use crate::num::lp::LinearProgram;
use crate::num::sparse::SpMat;
use crate::reach::{ReachError, ReachResult};
use crate::set::{
    union_of_constrained_zonotopes, union_witness, ConstrainedZonotope, FactorPoint, HPolytope,
    HybridZonotope, SetError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionRole {
    Free,
    Obstacle,
    Goal,
    Key,
    Door,
    Charge,
    Exchange,
}

impl RegionRole {
    /// Roles that restrict entry; these must not overlap any other
    /// region (their indicator must fire whenever the state is
    /// inside).
    pub fn is_restricted(&self) -> bool {
        matches!(self, RegionRole::Obstacle | RegionRole::Door)
    }
}

/// A labeled region of the map: geometry over the full state space, a
/// per-step additive disturbance applied while the region is active,
/// and a role used for validation and rendering.
#[derive(Debug, Clone)]
pub struct RegionSpec {
    pub id: String,
    pub polytope: HPolytope,
    pub disturbance: DVector<f64>,
    pub role: RegionRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionKind {
    Dcp,
    Ncp,
    Mixed,
}

/// Validation inputs for [`build_map`].
#[derive(Debug, Clone)]
pub struct MapValidation {
    /// Workspace box over the full state space.
    pub workspace_lo: Vec<f64>,
    pub workspace_hi: Vec<f64>,
    /// Dimensions along which coverage is grid-checked; region rows on
    /// other dimensions must be implied by the workspace box.
    pub coverage_dims: Vec<usize>,
    pub coverage_resolution: f64,
    /// Carve-outs: excluded from the coverage requirement and required
    /// to be covered by no region.
    pub keepouts: Vec<HPolytope>,
}

/// The augmented map `M'`: the union of regions with its binary
/// indicators appended as extra state coordinates, so that
/// `[x; delta] in M'` exposes the active-region indicator.
#[derive(Debug, Clone)]
pub struct AugmentedMap {
    pub regions: Vec<RegionSpec>,
    pub set: HybridZonotope,
    pub kind: PartitionKind,
    parts: Vec<ConstrainedZonotope>,
}

impl AugmentedMap {
    pub fn num_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn state_dim(&self) -> usize {
        self.set.dim() - self.num_regions()
    }

    pub fn region_index(&self, id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.id == id)
    }

    /// Indices of regions whose polytope contains `x`.
    pub fn regions_containing(&self, x: &DVector<f64>, tol: f64) -> Vec<usize> {
        self.regions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.polytope.contains(x, tol))
            .map(|(i, _)| i)
            .collect()
    }

    /// Disturbance matrix `W` with one column per region, in region
    /// order.
    pub fn disturbance_matrix(&self) -> SpMat {
        let n = self.state_dim();
        let mut triplets = Vec::new();
        for (j, r) in self.regions.iter().enumerate() {
            for i in 0..n {
                if r.disturbance[i] != 0.0 {
                    triplets.push((i, j, r.disturbance[i]));
                }
            }
        }
        SpMat::from_triplets(n, self.regions.len(), &triplets)
    }

    /// Exact factor assignment placing state `x` in region `part` of
    /// the augmented set. `x` must satisfy the region's H-rep.
    pub fn witness_factors(&self, part: usize, x: &DVector<f64>) -> ReachResult<FactorPoint> {
        let cz = &self.parts[part];
        let n = self.state_dim();
        // Base box factors: gens = [diag(w) | 0], center = lo.
        let mut xi = DVector::zeros(cz.num_gens());
        for i in 0..n {
            let w = cz.generators.get(i, i);
            if w.abs() > 1e-14 {
                xi[i] = ((x[i] - cz.center[i]) / w).clamp(0.0, 1.0);
            }
        }
        // Slack factors from the constraint rows [T | diag(s)].
        for row in 0..cz.num_cons() {
            let mut acc = 0.0;
            let mut slack_col = None;
            let mut slack_scale = 0.0;
            for (j, v) in cz.con_matrix.row(row) {
                if j < n {
                    acc += v * xi[j];
                } else if j == n + row {
                    slack_col = Some(j);
                    slack_scale = v;
                } else {
                    acc += v * xi[j];
                }
            }
            if let Some(j) = slack_col {
                if slack_scale.abs() > 1e-14 {
                    xi[j] = ((cz.con_rhs[row] - acc) / slack_scale).clamp(0.0, 1.0);
                }
            }
        }
        let (cont, bin) = union_witness(&self.parts, part, &xi);
        let fp = FactorPoint::new(cont, bin);
        let residual = self.set.constraint_residual(&fp);
        if residual > 1e-7 {
            return Err(ReachError::Set(SetError::Shape(format!(
                "witness residual {residual:.2e} for region {part}; point not in region?"
            ))));
        }
        Ok(fp)
    }
}

fn interior_overlap(a: &HPolytope, b: &HPolytope) -> ReachResult<Option<Vec<f64>>> {
    // maximize t s.t. L_a x + t <= r_a, L_b x + t <= r_b, eq rows
    // hard, t <= 1. A positive optimum is a shared interior point.
    let dim = a.dim();
    let rows = a.num_ineq() + b.num_ineq() + 1;
    let mut triplets = Vec::new();
    let mut rhs = DVector::zeros(rows);
    let mut row = 0;
    for (src, mat, r) in [(0, &a.ineq_matrix, &a.ineq_rhs), (1, &b.ineq_matrix, &b.ineq_rhs)] {
        let _ = src;
        for i in 0..mat.nrows() {
            for (j, v) in mat.row(i) {
                triplets.push((row, j, v));
            }
            triplets.push((row, dim, 1.0));
            rhs[row] = r[i];
            row += 1;
        }
    }
    // t <= 1
    triplets.push((row, dim, 1.0));
    rhs[row] = 1.0;
    let ineq = SpMat::from_triplets(rows, dim + 1, &triplets);

    let mut eq_triplets = Vec::new();
    let mut eq_rhs = Vec::new();
    for (mat, r) in [(&a.eq_matrix, &a.eq_rhs), (&b.eq_matrix, &b.eq_rhs)] {
        for i in 0..mat.nrows() {
            for (j, v) in mat.row(i) {
                eq_triplets.push((eq_rhs.len(), j, v));
            }
            eq_rhs.push(r[i]);
        }
    }
    let eq = SpMat::from_triplets(eq_rhs.len(), dim + 1, &eq_triplets);
    let eq_rhs = DVector::from_vec(eq_rhs);

    let lp = LinearProgram {
        num_vars: dim + 1,
        ineq: Some((&ineq, &rhs)),
        eq: if eq.nrows() > 0 {
            Some((&eq, &eq_rhs))
        } else {
            None
        },
        bounds: None,
    };
    let mut c = vec![0.0; dim + 1];
    c[dim] = 1.0;
    match lp.maximize(&c) {
        Ok((t, x)) if t > 1e-9 => Ok(Some(x.as_slice()[..dim].to_vec())),
        Ok(_) => Ok(None),
        Err(crate::num::lp::LpError::Infeasible) => Ok(None),
        Err(e) => Err(ReachError::Lp(e)),
    }
}

/// Grid positions at resolution `h` across `[lo, hi]` (cell centers).
fn grid_axis(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let n = (((hi - lo) / h).ceil() as usize).max(1);
    (0..n).map(|i| lo + (i as f64 + 0.5) * (hi - lo) / n as f64).collect()
}

fn check_coverage(
    regions: &[RegionSpec],
    val: &MapValidation,
) -> ReachResult<()> {
    let dim = val.workspace_lo.len();
    let cov: Vec<usize> = val.coverage_dims.clone();
    // Rows on non-coverage dimensions must be implied by the
    // workspace box (checked by interval arithmetic); rows mixing
    // coverage and non-coverage dims are not supported.
    for r in regions {
        for i in 0..r.polytope.num_ineq() {
            let row: Vec<(usize, f64)> = r.polytope.ineq_matrix.row(i).collect();
            let touches_cov = row.iter().any(|(j, _)| cov.contains(j));
            let touches_other = row.iter().any(|(j, _)| !cov.contains(j));
            if touches_cov && touches_other {
                return Err(ReachError::CoverageRowUnsupported {
                    region: r.id.clone(),
                    detail: format!("row {i} mixes coverage and non-coverage dimensions"),
                });
            }
            if touches_other {
                let mut worst = 0.0;
                for &(j, v) in &row {
                    worst += if v > 0.0 {
                        v * val.workspace_hi[j]
                    } else {
                        v * val.workspace_lo[j]
                    };
                }
                if worst > r.polytope.ineq_rhs[i] + 1e-9 {
                    return Err(ReachError::CoverageRowUnsupported {
                        region: r.id.clone(),
                        detail: format!(
                            "row {i} cuts into the workspace box (max {worst} > rhs {})",
                            r.polytope.ineq_rhs[i]
                        ),
                    });
                }
            }
        }
        if r.polytope.num_eq() > 0 {
            return Err(ReachError::CoverageRowUnsupported {
                region: r.id.clone(),
                detail: "equality rows are not supported by the coverage grid".into(),
            });
        }
    }

    // Grid over the coverage dims; other coordinates at box centers.
    let axes: Vec<Vec<f64>> = cov
        .iter()
        .map(|&d| grid_axis(val.workspace_lo[d], val.workspace_hi[d], val.coverage_resolution))
        .collect();
    let mut point = DVector::zeros(dim);
    for d in 0..dim {
        point[d] = 0.5 * (val.workspace_lo[d] + val.workspace_hi[d]);
    }
    let mut idx = vec![0usize; cov.len()];
    loop {
        for (a, &d) in cov.iter().enumerate() {
            point[d] = axes[a][idx[a]];
        }
        let in_keepout = val
            .keepouts
            .iter()
            .any(|k| k.contains(&point, -1e-9));
        if !in_keepout {
            let covered = regions.iter().any(|r| r.polytope.contains(&point, 1e-9));
            if !covered {
                return Err(ReachError::CoverageGap {
                    point: point.as_slice().to_vec(),
                });
            }
        }
        // Advance the multi-index.
        let mut a = 0;
        loop {
            if a == cov.len() {
                return Ok(());
            }
            idx[a] += 1;
            if idx[a] < axes[a].len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

/// Build the augmented map from labeled regions, validating the
/// partition according to `kind`:
/// Dcp: all region interiors pairwise disjoint, full coverage.
/// Ncp: coverage only.
/// Mixed: restricted-role regions (obstacles, doors) disjoint from
/// everything, coverage for the rest.
pub fn build_map(
    regions: Vec<RegionSpec>,
    kind: PartitionKind,
    validation: &MapValidation,
) -> ReachResult<AugmentedMap> {
    if regions.is_empty() {
        return Err(ReachError::NoRegions);
    }
    let n_x = validation.workspace_lo.len();
    for r in &regions {
        if r.disturbance.len() != n_x {
            return Err(ReachError::SystemMismatch(format!(
                "region `{}` disturbance has length {}, state dimension is {}",
                r.id,
                r.disturbance.len(),
                n_x
            )));
        }
    }

    // Interior-disjointness probes.
    for i in 0..regions.len() {
        for j in (i + 1)..regions.len() {
            let must_be_disjoint = match kind {
                PartitionKind::Dcp => true,
                PartitionKind::Ncp => false,
                PartitionKind::Mixed => {
                    regions[i].role.is_restricted() || regions[j].role.is_restricted()
                }
            };
            if must_be_disjoint {
                if let Some(witness) = interior_overlap(&regions[i].polytope, &regions[j].polytope)?
                {
                    return Err(ReachError::DcpViolation {
                        a: regions[i].id.clone(),
                        b: regions[j].id.clone(),
                        witness,
                    });
                }
            }
        }
    }
    // Keep-outs must not be covered by any region.
    for (ki, keep) in validation.keepouts.iter().enumerate() {
        for r in &regions {
            if interior_overlap(keep, &r.polytope)?.is_some() {
                return Err(ReachError::KeepoutCovered {
                    index: ki,
                    region: r.id.clone(),
                });
            }
        }
    }

    check_coverage(&regions, validation)?;

    // Union, then expose the indicators as trailing coordinates.
    let mut parts = Vec::with_capacity(regions.len());
    for r in &regions {
        let cz = r.polytope.to_constrained_zonotope().map_err(|e| match e {
            SetError::Lp(crate::num::lp::LpError::Infeasible) => ReachError::RegionEmpty {
                id: r.id.clone(),
            },
            SetError::Lp(crate::num::lp::LpError::Unbounded) => ReachError::RegionUnbounded {
                id: r.id.clone(),
            },
            other => ReachError::Set(other),
        })?;
        parts.push(cz);
    }
    let union = union_of_constrained_zonotopes(&parts)?;
    let set = union.augment_with_binaries();
    Ok(AugmentedMap {
        regions,
        set,
        kind,
        parts,
    })
}

/// Per-step map table. Region identity, roles, and disturbances stay
/// fixed across steps; only the geometry may move.
#[derive(Debug, Clone)]
pub struct MapSchedule {
    maps: Vec<AugmentedMap>,
}

impl MapSchedule {
    pub fn fixed(map: AugmentedMap) -> Self {
        Self { maps: vec![map] }
    }

    pub fn time_varying(maps: Vec<AugmentedMap>) -> ReachResult<Self> {
        if maps.is_empty() {
            return Err(ReachError::NoRegions);
        }
        let first = &maps[0];
        for (step, m) in maps.iter().enumerate().skip(1) {
            if m.num_regions() != first.num_regions() {
                return Err(ReachError::ScheduleMismatch {
                    step,
                    detail: format!(
                        "region count {} vs {}",
                        m.num_regions(),
                        first.num_regions()
                    ),
                });
            }
            for (a, b) in m.regions.iter().zip(first.regions.iter()) {
                if a.id != b.id {
                    return Err(ReachError::ScheduleMismatch {
                        step,
                        detail: format!("region id `{}` vs `{}`", a.id, b.id),
                    });
                }
                if a.role != b.role || (&a.disturbance - &b.disturbance).amax() > 0.0 {
                    return Err(ReachError::ScheduleMismatch {
                        step,
                        detail: format!("region `{}` role/disturbance changed", a.id),
                    });
                }
            }
        }
        Ok(Self { maps })
    }

    pub fn is_time_varying(&self) -> bool {
        self.maps.len() > 1
    }

    pub fn at(&self, k: usize) -> &AugmentedMap {
        if self.maps.len() == 1 {
            &self.maps[0]
        } else {
            &self.maps[k]
        }
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn region_ids(&self) -> Vec<String> {
        self.maps[0].regions.iter().map(|r| r.id.clone()).collect()
    }

    pub fn num_regions(&self) -> usize {
        self.maps[0].num_regions()
    }

    pub fn state_dim(&self) -> usize {
        self.maps[0].state_dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_region(id: &str, role: RegionRole, lo: &[f64], hi: &[f64], n_x: usize) -> RegionSpec {
        RegionSpec {
            id: id.into(),
            polytope: HPolytope::from_box(lo, hi),
            disturbance: DVector::zeros(n_x),
            role,
        }
    }

    fn val_2d() -> MapValidation {
        MapValidation {
            workspace_lo: vec![0.0, 0.0],
            workspace_hi: vec![4.0, 4.0],
            coverage_dims: vec![0, 1],
            coverage_resolution: 0.25,
            keepouts: vec![],
        }
    }

    #[test]
    fn singleton_map() {
        let r = box_region("all", RegionRole::Free, &[0.0, 0.0], &[4.0, 4.0], 2);
        let m = build_map(vec![r], PartitionKind::Dcp, &val_2d()).unwrap();
        assert_eq!(m.num_regions(), 1);
        assert_eq!(m.set.dim(), 3);
        let fp = m
            .witness_factors(0, &DVector::from_vec(vec![1.0, 2.0]))
            .unwrap();
        let x = m.set.decode(&fp);
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 2.0).abs() < 1e-9);
        assert!((x[2] - 1.0).abs() < 1e-12, "indicator coordinate");
    }

    #[test]
    fn seven_box_dcp_and_indicator_uniqueness() {
        // Center box surrounded by a ring of six boxes tiling [0,4]^2
        // minus the center: a disjoint convex partition.
        let regions = vec![
            box_region("C", RegionRole::Goal, &[1.5, 1.5], &[2.5, 2.5], 2),
            box_region("W", RegionRole::Free, &[0.0, 0.0], &[1.5, 4.0], 2),
            box_region("E", RegionRole::Free, &[2.5, 0.0], &[4.0, 4.0], 2),
            box_region("S", RegionRole::Free, &[1.5, 0.0], &[2.5, 1.5], 2),
            box_region("N", RegionRole::Free, &[1.5, 2.5], &[2.5, 4.0], 2),
            // Two extra slivers to reach seven parts.
            box_region("S2", RegionRole::Free, &[1.5, 0.0], &[2.0, 1.5], 2),
            box_region("N2", RegionRole::Free, &[2.0, 2.5], &[2.5, 4.0], 2),
        ];
        // S2 overlaps S, so this is not a DCP.
        let err = build_map(regions.clone(), PartitionKind::Dcp, &val_2d()).unwrap_err();
        match err {
            ReachError::DcpViolation { a, b, .. } => {
                assert!((a == "S" && b == "S2") || (a == "S2" && b == "S"));
            }
            other => panic!("unexpected {other}"),
        }
        // As an NCP it is fine.
        let m = build_map(regions, PartitionKind::Ncp, &val_2d()).unwrap();
        assert_eq!(m.set.complexity().n_b, 7);
        // Now a true DCP: drop the slivers.
        let regions = vec![
            box_region("C", RegionRole::Goal, &[1.5, 1.5], &[2.5, 2.5], 2),
            box_region("W", RegionRole::Free, &[0.0, 0.0], &[1.5, 4.0], 2),
            box_region("E", RegionRole::Free, &[2.5, 0.0], &[4.0, 4.0], 2),
            box_region("S", RegionRole::Free, &[1.5, 0.0], &[2.5, 1.5], 2),
            box_region("N", RegionRole::Free, &[1.5, 2.5], &[2.5, 4.0], 2),
        ];
        let m = build_map(regions, PartitionKind::Dcp, &val_2d()).unwrap();
        // A point strictly inside the center box sits only in C.
        let p = DVector::from_vec(vec![2.0, 2.0]);
        assert_eq!(m.regions_containing(&p, -1e-9), vec![0]);
    }

    #[test]
    fn coverage_gap_detected() {
        let regions = vec![box_region(
            "half",
            RegionRole::Free,
            &[0.0, 0.0],
            &[2.0, 4.0],
            2,
        )];
        let err = build_map(regions, PartitionKind::Ncp, &val_2d()).unwrap_err();
        match err {
            ReachError::CoverageGap { point } => assert!(point[0] > 2.0),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn ncp_point_in_overlap_has_two_witnesses() {
        let regions = vec![
            box_region("bg", RegionRole::Free, &[0.0, 0.0], &[4.0, 4.0], 2),
            box_region("target", RegionRole::Goal, &[1.0, 1.0], &[3.0, 3.0], 2),
        ];
        let m = build_map(regions, PartitionKind::Ncp, &val_2d()).unwrap();
        let p = DVector::from_vec(vec![2.0, 2.0]);
        assert_eq!(m.regions_containing(&p, 0.0), vec![0, 1]);
        for part in 0..2 {
            let fp = m.witness_factors(part, &p).unwrap();
            let x = m.set.decode(&fp);
            assert!((x[0] - 2.0).abs() < 1e-9);
            // Indicator block picks out the chosen part.
            assert!((x[2 + part] - 1.0).abs() < 1e-12);
            assert!(x[2 + (1 - part)].abs() < 1e-12);
        }
    }

    #[test]
    fn keepout_must_stay_uncovered() {
        let mut val = val_2d();
        val.keepouts = vec![HPolytope::from_box(&[1.0, 1.0], &[2.0, 2.0])];
        // A region covering the keep-out is rejected.
        let regions = vec![box_region("bg", RegionRole::Free, &[0.0, 0.0], &[4.0, 4.0], 2)];
        let err = build_map(regions, PartitionKind::Ncp, &val).unwrap_err();
        assert!(matches!(err, ReachError::KeepoutCovered { .. }));
        // Regions tiling around it pass, and the grid skips the hole.
        let regions = vec![
            box_region("W", RegionRole::Free, &[0.0, 0.0], &[1.0, 4.0], 2),
            box_region("E", RegionRole::Free, &[2.0, 0.0], &[4.0, 4.0], 2),
            box_region("S", RegionRole::Free, &[1.0, 0.0], &[2.0, 1.0], 2),
            box_region("N", RegionRole::Free, &[1.0, 2.0], &[2.0, 4.0], 2),
        ];
        build_map(regions, PartitionKind::Ncp, &val).unwrap();
    }
}
