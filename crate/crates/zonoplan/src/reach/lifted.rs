//! Lifted forward reachability: one hybrid zonotope over the stacked
//! trajectory `[x_0, delta_0, u_0, x_1, delta_1, u_1, ..., x_N,
//! delta_N]` containing exactly the dynamically feasible runs, plus
//! the intersection machinery that carves MTL clauses into it.

use nalgebra::DVector;

use crate::mtl::OperatorPolytope;
use crate::num::sparse::SpMat;
use crate::reach::region::{AugmentedMap, MapSchedule};
use crate::reach::system::LtiSystem;
use crate::reach::{ReachError, ReachResult};
use crate::set::{Complexity, HPolytope, HybridZonotope};

/// Closed-form coordinate layout of the lifted trajectory vector.
/// Step blocks are `[x_k (n_x), delta_k (n_b), u_k (n_u)]`; the final
/// block has no input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiftedIndex {
    pub n_x: usize,
    pub n_b: usize,
    pub n_u: usize,
    /// Horizon N: steps run 0..=N.
    pub n_steps: usize,
}

impl LiftedIndex {
    fn block(&self) -> usize {
        self.n_x + self.n_b + self.n_u
    }

    pub fn dim(&self) -> usize {
        self.n_steps * self.block() + self.n_x + self.n_b
    }

    pub fn state(&self, k: usize, i: usize) -> usize {
        debug_assert!(k <= self.n_steps && i < self.n_x);
        k * self.block() + i
    }

    pub fn bin(&self, k: usize, j: usize) -> usize {
        debug_assert!(k <= self.n_steps && j < self.n_b);
        k * self.block() + self.n_x + j
    }

    pub fn input(&self, k: usize, i: usize) -> usize {
        debug_assert!(k < self.n_steps && i < self.n_u);
        k * self.block() + self.n_x + self.n_b + i
    }

    pub fn state_coords(&self, k: usize) -> Vec<usize> {
        (0..self.n_x).map(|i| self.state(k, i)).collect()
    }

    pub fn bin_coords(&self, k: usize) -> Vec<usize> {
        (0..self.n_b).map(|j| self.bin(k, j)).collect()
    }

    pub fn input_coords(&self, k: usize) -> Vec<usize> {
        (0..self.n_u).map(|i| self.input(k, i)).collect()
    }

    /// Stack a trajectory into the lifted layout.
    pub fn stack(
        &self,
        states: &[DVector<f64>],
        bins: &[DVector<f64>],
        inputs: &[DVector<f64>],
    ) -> DVector<f64> {
        assert_eq!(states.len(), self.n_steps + 1);
        assert_eq!(bins.len(), self.n_steps + 1);
        assert_eq!(inputs.len(), self.n_steps);
        let mut z = DVector::zeros(self.dim());
        for k in 0..=self.n_steps {
            for i in 0..self.n_x {
                z[self.state(k, i)] = states[k][i];
            }
            for j in 0..self.n_b {
                z[self.bin(k, j)] = bins[k][j];
            }
            if k < self.n_steps {
                for i in 0..self.n_u {
                    z[self.input(k, i)] = inputs[k][i];
                }
            }
        }
        z
    }

    /// Split a lifted vector back into per-step states, indicator
    /// vectors, and inputs.
    #[allow(clippy::type_complexity)]
    pub fn unstack(
        &self,
        z: &DVector<f64>,
    ) -> (Vec<DVector<f64>>, Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let mut states = Vec::with_capacity(self.n_steps + 1);
        let mut bins = Vec::with_capacity(self.n_steps + 1);
        let mut inputs = Vec::with_capacity(self.n_steps);
        for k in 0..=self.n_steps {
            states.push(DVector::from_iterator(
                self.n_x,
                (0..self.n_x).map(|i| z[self.state(k, i)]),
            ));
            bins.push(DVector::from_iterator(
                self.n_b,
                (0..self.n_b).map(|j| z[self.bin(k, j)]),
            ));
            if k < self.n_steps {
                inputs.push(DVector::from_iterator(
                    self.n_u,
                    (0..self.n_u).map(|i| z[self.input(k, i)]),
                ));
            }
        }
        (states, bins, inputs)
    }
}

/// Extra per-step state constraint applied through a coordinate
/// selection, e.g. a speed hexagon or a residual-position keep-out
/// realized as its own hybrid zonotope.
#[derive(Debug, Clone)]
pub struct StateConstraint {
    pub label: String,
    pub step: usize,
    /// State dimensions (within the step's state block) the set binds.
    pub state_dims: Vec<usize>,
    pub set: HybridZonotope,
}

/// Per-component complexity record; the lifted totals are the
/// componentwise sums of the step components plus `n_x` linking rows
/// per step, which the audit checks as exact integer identities.
#[derive(Debug, Clone)]
pub struct ComplexityBreakdown {
    pub x0: Complexity,
    pub inputs: Vec<Complexity>,
    pub maps: Vec<Complexity>,
    pub link_rows_per_step: usize,
    /// Extra state-constraint contributions `(n_g, n_b, n_c + dim)`.
    pub extras: Vec<Complexity>,
}

impl ComplexityBreakdown {
    pub fn expected_total(&self) -> Complexity {
        let mut t = self.x0;
        for c in self.inputs.iter().chain(self.maps.iter()).chain(self.extras.iter()) {
            t = t + *c;
        }
        t.n_c += self.inputs.len() * self.link_rows_per_step;
        t
    }
}

/// The lifted reachable set with its coordinate bookkeeping.
#[derive(Debug, Clone)]
pub struct LiftedReachSet {
    pub set: HybridZonotope,
    pub index: LiftedIndex,
    pub region_ids: Vec<String>,
    pub breakdown: ComplexityBreakdown,
    /// Complexity added per intersected MTL clause.
    pub mtl_deltas: Vec<Complexity>,
}

impl LiftedReachSet {
    /// Expected complexity including MTL clause growth.
    pub fn expected_complexity(&self) -> Complexity {
        let mut t = self.breakdown.expected_total();
        for d in &self.mtl_deltas {
            t = t + *d;
        }
        t
    }
}

/// Initial lifted state `X'_0`: the step-0 map with the state block
/// pinned to `x0`, which forces the initial indicators consistent with
/// `x0`'s region.
fn initial_lifted_state(m0: &AugmentedMap, x0: &DVector<f64>) -> ReachResult<HybridZonotope> {
    let n_x = m0.state_dim();
    let n_b = m0.num_regions();
    if m0.regions_containing(x0, 1e-9).is_empty() {
        let (nearest, violation) = m0
            .regions
            .iter()
            .map(|r| (r.id.clone(), r.polytope.violation(x0)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty region list");
        return Err(ReachError::InitialStateOutsideMap { nearest, violation });
    }
    let mut triplets = Vec::with_capacity(n_x);
    for i in 0..n_x {
        triplets.push((i, i, 1.0));
    }
    let sel = SpMat::from_triplets(n_x, n_x + n_b, &triplets);
    let h = HPolytope::fixed_point(x0.as_slice());
    Ok(m0.set.generalized_intersection_hz(&sel, &h)?)
}

/// One sparsity-promoting reachability step: the constrained product
/// `(X'_k x U_k x M'_{k+1})` intersected through
/// `R = [A W B -I 0]` with `{0}`, projected onto the trailing state
/// and indicator block.
pub fn forward_step(
    x_prev: &HybridZonotope,
    sys: &LtiSystem,
    u_k: &HybridZonotope,
    m_next: &AugmentedMap,
) -> ReachResult<HybridZonotope> {
    let n_x = sys.n_x();
    let n_b = m_next.num_regions();
    let n_u = sys.n_u();
    let prod = x_prev.cartesian_product(u_k).cartesian_product(&m_next.set);
    let link = link_matrix(sys, 0, n_x, n_b, n_u, prod.dim())?;
    let zero = HPolytope::equalities(SpMat::identity(n_x), DVector::zeros(n_x))
        .expect("zero target polytope");
    let linked = prod.generalized_intersection_hz(&link, &zero)?;
    let coords: Vec<usize> = ((n_x + n_b + n_u)..(2 * (n_x + n_b) + n_u)).collect();
    Ok(linked.project(&coords)?)
}

/// The recursive product form of the same step, kept for
/// cross-checking: map the previous lifted state through `[A W; 0 0]`,
/// add the input image and a fresh indicator block, then intersect
/// with the next map.
pub fn forward_step_naive(
    x_prev: &HybridZonotope,
    sys: &LtiSystem,
    u_k: &HybridZonotope,
    m_next: &AugmentedMap,
) -> ReachResult<HybridZonotope> {
    let n_x = sys.n_x();
    let n_b = m_next.num_regions();
    let dim = n_x + n_b;
    // [A W; 0 0]
    let mut t = Vec::new();
    for (i, j, v) in sys.a.triplets() {
        t.push((i, j, v));
    }
    for (i, j, v) in sys.w.triplets() {
        t.push((i, n_x + j, v));
    }
    let am = SpMat::from_triplets(dim, dim, &t);
    let mapped = x_prev.affine_map(&am, &DVector::zeros(dim))?;
    // [B; 0] U_k
    let mut t = Vec::new();
    for (i, j, v) in sys.b.triplets() {
        t.push((i, j, v));
    }
    let bu = u_k.affine_map(&SpMat::from_triplets(dim, sys.n_u(), &t), &DVector::zeros(dim))?;
    // [0; I] {0,1}^{n_b}
    let mut t = Vec::new();
    for j in 0..n_b {
        t.push((n_x + j, j, 1.0));
    }
    let bins = HybridZonotope::unit_binaries(n_b)
        .affine_map(&SpMat::from_triplets(dim, n_b, &t), &DVector::zeros(dim))?;
    let summed = mapped.minkowski_sum(&bu)?.minkowski_sum(&bins)?;
    Ok(summed.intersect_hybrid(&SpMat::identity(dim), &m_next.set)?)
}

/// Linking rows `A x_k + W delta_k + B u_k - x_{k+1} = 0` laid out for
/// a set whose trailing blocks are `[.., x_k, delta_k, u_k, x_{k+1},
/// delta_{k+1}]`; `offset` is the coordinate of `x_k`.
fn link_matrix(
    sys: &LtiSystem,
    offset: usize,
    n_x: usize,
    n_b: usize,
    n_u: usize,
    total_dim: usize,
) -> ReachResult<SpMat> {
    let mut t = Vec::new();
    for (i, j, v) in sys.a.triplets() {
        t.push((i, offset + j, v));
    }
    for (i, j, v) in sys.w.triplets() {
        t.push((i, offset + n_x + j, v));
    }
    for (i, j, v) in sys.b.triplets() {
        t.push((i, offset + n_x + n_b + j, v));
    }
    for i in 0..n_x {
        t.push((i, offset + n_x + n_b + n_u + i, -1.0));
    }
    Ok(SpMat::from_triplets(n_x, total_dim, &t))
}

/// Build the lifted set of all dynamically feasible trajectories over
/// an `n_steps` horizon, including optional extra per-step state
/// constraints.
pub fn build_lifted(
    sys: &LtiSystem,
    schedule: &MapSchedule,
    n_steps: usize,
    extras: &[StateConstraint],
) -> ReachResult<LiftedReachSet> {
    assert!(n_steps >= 1, "horizon must be at least 1");
    let n_x = sys.n_x();
    let n_b = schedule.num_regions();
    let n_u = sys.n_u();
    if schedule.state_dim() != n_x {
        return Err(ReachError::SystemMismatch(format!(
            "map state dimension {} vs system {}",
            schedule.state_dim(),
            n_x
        )));
    }
    if sys.n_regions() != n_b {
        return Err(ReachError::SystemMismatch(format!(
            "W has {} columns, map has {} regions",
            sys.n_regions(),
            n_b
        )));
    }
    if schedule.is_time_varying() && schedule.len() != n_steps + 1 {
        return Err(ReachError::ScheduleLength {
            expected: n_steps + 1,
            got: schedule.len(),
        });
    }

    let index = LiftedIndex {
        n_x,
        n_b,
        n_u,
        n_steps,
    };

    let mut set = initial_lifted_state(schedule.at(0), &sys.x0)?;
    let x0_complexity = set.complexity();
    let mut inputs = Vec::with_capacity(n_steps);
    let mut maps = Vec::with_capacity(n_steps);

    for k in 0..n_steps {
        let u_k = sys.input_at(k);
        let m_next = schedule.at(k + 1);
        inputs.push(u_k.complexity());
        maps.push(m_next.set.complexity());
        set = set.cartesian_product(u_k).cartesian_product(&m_next.set);
        let link = link_matrix(sys, index.state(k, 0), n_x, n_b, n_u, set.dim())?;
        let zero = HPolytope::equalities(SpMat::identity(n_x), DVector::zeros(n_x))
            .expect("zero target polytope");
        set = set.generalized_intersection_hz(&link, &zero)?;
    }

    let mut extra_deltas = Vec::with_capacity(extras.len());
    for sc in extras {
        if sc.step > n_steps {
            return Err(ReachError::UnresolvableCoordinate {
                step: sc.step,
                region: sc.label.clone(),
            });
        }
        let coords: Vec<usize> = sc
            .state_dims
            .iter()
            .map(|&d| index.state(sc.step, d))
            .collect();
        let sel = SpMat::selection(&coords, set.dim());
        let before = set.complexity();
        set = set.intersect_hybrid(&sel, &sc.set)?;
        let after = set.complexity();
        extra_deltas.push(Complexity {
            n_g: after.n_g - before.n_g,
            n_b: after.n_b - before.n_b,
            n_c: after.n_c - before.n_c,
        });
    }

    let breakdown = ComplexityBreakdown {
        x0: x0_complexity,
        inputs,
        maps,
        link_rows_per_step: n_x,
        extras: extra_deltas,
    };
    debug_assert_eq!(set.complexity(), breakdown.expected_total());

    Ok(LiftedReachSet {
        set,
        index,
        region_ids: schedule.region_ids(),
        breakdown,
        mtl_deltas: Vec::new(),
    })
}

/// Intersect the lifted set with compiled MTL clause polytopes through
/// 0/1 selection matrices built from the index bookkeeping. Clauses
/// are order-independent.
pub fn apply_mtl(
    lifted: &LiftedReachSet,
    clauses: &[OperatorPolytope],
) -> ReachResult<LiftedReachSet> {
    let mut out = lifted.clone();
    for clause in clauses {
        let mut rows = Vec::with_capacity(clause.coords.len());
        for (step, region) in &clause.coords {
            if *step > out.index.n_steps {
                return Err(ReachError::UnresolvableCoordinate {
                    step: *step,
                    region: region.clone(),
                });
            }
            let col = out
                .region_ids
                .iter()
                .position(|id| id == region)
                .ok_or_else(|| ReachError::UnresolvableCoordinate {
                    step: *step,
                    region: region.clone(),
                })?;
            rows.push(out.index.bin(*step, col));
        }
        let sel = SpMat::selection(&rows, out.set.dim());
        let before = out.set.complexity();
        out.set = out.set.generalized_intersection_hz(&sel, &clause.poly)?;
        let after = out.set.complexity();
        let delta = Complexity {
            n_g: after.n_g - before.n_g,
            n_b: after.n_b - before.n_b,
            n_c: after.n_c - before.n_c,
        };
        debug_assert_eq!(delta, clause.complexity_delta());
        out.mtl_deltas.push(delta);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reach::region::{build_map, MapValidation, PartitionKind, RegionRole, RegionSpec};
    use crate::reach::system::double_integrator;
    use crate::set::ContainsSettings;

    fn one_region_map_4d() -> AugmentedMap {
        let ws_lo = vec![-5.0, -5.0, -2.0, -2.0];
        let ws_hi = vec![5.0, 5.0, 2.0, 2.0];
        let region = RegionSpec {
            id: "all".into(),
            polytope: crate::set::HPolytope::from_box(&ws_lo, &ws_hi),
            disturbance: DVector::zeros(4),
            role: RegionRole::Free,
        };
        build_map(
            vec![region],
            PartitionKind::Dcp,
            &MapValidation {
                workspace_lo: ws_lo,
                workspace_hi: ws_hi,
                coverage_dims: vec![0, 1],
                coverage_resolution: 1.0,
                keepouts: vec![],
            },
        )
        .unwrap()
    }

    #[test]
    fn forward_step_point_dynamics() {
        let (a, b, w) = double_integrator(1);
        let map = one_region_map_4d();
        let sys = LtiSystem::new(
            a,
            b,
            w,
            DVector::zeros(4),
            vec![HybridZonotope::point(&[1.0, 0.0])],
        )
        .unwrap();
        let x0_set = initial_lifted_state(&map, &sys.x0).unwrap();
        let next = forward_step(&x0_set, &sys, sys.input_at(0), &map).unwrap();
        // x1 = (0,0,1,0), indicator 1; a point input set pins the
        // result to a single decoded point.
        let oracle = next.containment_oracle(ContainsSettings::default()).unwrap();
        let want = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(oracle.contains(&want).unwrap().holds());
        let off = DVector::from_vec(vec![0.3, 0.0, 1.0, 0.0, 1.0]);
        assert!(!oracle.contains(&off).unwrap().holds());
        let off_vel = DVector::from_vec(vec![0.0, 0.0, 0.5, 0.0, 1.0]);
        assert!(!oracle.contains(&off_vel).unwrap().holds());
    }

    #[test]
    fn forward_step_disturbance_shift() {
        let (a, b, _) = double_integrator(1);
        let w = SpMat::from_triplets(4, 1, &[(0, 0, 0.2)]);
        let map = one_region_map_4d();
        let sys = LtiSystem::new(
            a,
            b,
            w,
            DVector::zeros(4),
            vec![HybridZonotope::point(&[1.0, 0.0])],
        )
        .unwrap();
        let x0_set = initial_lifted_state(&map, &sys.x0).unwrap();
        let next = forward_step(&x0_set, &sys, sys.input_at(0), &map).unwrap();
        let oracle = next.containment_oracle(ContainsSettings::default()).unwrap();
        let want = DVector::from_vec(vec![0.2, 0.0, 1.0, 0.0, 1.0]);
        assert!(oracle.contains(&want).unwrap().holds());
        let undisturbed = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(!oracle.contains(&undisturbed).unwrap().holds());
    }

    #[test]
    fn naive_and_sparse_steps_agree_on_points() {
        let (a, b, w) = double_integrator(1);
        let map = one_region_map_4d();
        let sys = LtiSystem::new(
            a,
            b,
            w,
            DVector::from_vec(vec![0.5, -0.5, 0.0, 0.0]),
            vec![HybridZonotope::from_box(&[-1.0, -1.0], &[1.0, 1.0])],
        )
        .unwrap();
        let x0_set = initial_lifted_state(&map, &sys.x0).unwrap();
        let sparse = forward_step(&x0_set, &sys, sys.input_at(0), &map).unwrap();
        let naive = forward_step_naive(&x0_set, &sys, sys.input_at(0), &map).unwrap();
        let oracle_sparse = sparse
            .containment_oracle(ContainsSettings::default())
            .unwrap();
        let oracle_naive = naive
            .containment_oracle(ContainsSettings::default())
            .unwrap();
        let delta = DVector::from_vec(vec![1.0]);
        for i in 0..20 {
            let ux = -1.0 + 2.0 * (i as f64) / 19.0;
            let u = DVector::from_vec(vec![ux, 0.3]);
            let x1 = sys.step(&sys.x0, &u, &delta);
            let mut p = DVector::zeros(5);
            for j in 0..4 {
                p[j] = x1[j];
            }
            p[4] = 1.0;
            assert!(oracle_sparse.contains(&p).unwrap().holds(), "sparse misses u={ux}");
            assert!(oracle_naive.contains(&p).unwrap().holds(), "naive misses u={ux}");
        }
    }

    #[test]
    fn lifted_one_step_contains_simulation() {
        let (a, b, w) = double_integrator(1);
        let map = one_region_map_4d();
        let sys = LtiSystem::new(
            a,
            b,
            w,
            DVector::zeros(4),
            vec![HybridZonotope::from_box(&[-1.0, -1.0], &[1.0, 1.0])],
        )
        .unwrap();
        let schedule = MapSchedule::fixed(map);
        let lifted = build_lifted(&sys, &schedule, 1, &[]).unwrap();
        assert_eq!(lifted.set.dim(), 2 * 4 + 2 * 1 + 2);
        assert_eq!(lifted.set.complexity(), lifted.breakdown.expected_total());

        let delta = DVector::from_vec(vec![1.0]);
        let u = DVector::from_vec(vec![0.4, -0.7]);
        let x1 = sys.step(&sys.x0, &u, &delta);
        let z = lifted.index.stack(
            &[sys.x0.clone(), x1],
            &[delta.clone(), delta.clone()],
            &[u],
        );
        let oracle = lifted
            .set
            .containment_oracle(ContainsSettings::default())
            .unwrap();
        assert!(oracle.contains(&z).unwrap().holds());
        // A dynamics-violating stack is rejected.
        let z_bad = {
            let mut zb = z.clone();
            zb[lifted.index.state(1, 0)] += 0.5;
            zb
        };
        assert!(!oracle.contains(&z_bad).unwrap().holds());
    }

    #[test]
    fn initial_state_outside_map_is_diagnosed() {
        let (a, b, w) = double_integrator(1);
        let map = one_region_map_4d();
        let sys = LtiSystem::new(
            a,
            b,
            w,
            DVector::from_vec(vec![9.0, 0.0, 0.0, 0.0]),
            vec![HybridZonotope::point(&[0.0, 0.0])],
        )
        .unwrap();
        let schedule = MapSchedule::fixed(map);
        let err = build_lifted(&sys, &schedule, 1, &[]).unwrap_err();
        match err {
            ReachError::InitialStateOutsideMap { nearest, violation } => {
                assert_eq!(nearest, "all");
                assert!((violation - 4.0).abs() < 1e-9);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn mtl_clause_deltas_match_table() {
        let (a, b, w) = double_integrator(1);
        let map = one_region_map_4d();
        let sys = LtiSystem::new(
            a,
            b,
            w,
            DVector::zeros(4),
            vec![HybridZonotope::from_box(&[-1.0, -1.0], &[1.0, 1.0])],
        )
        .unwrap();
        let schedule = MapSchedule::fixed(map);
        let lifted = build_lifted(&sys, &schedule, 3, &[]).unwrap();
        let clauses = crate::mtl::compile_cnf(
            &crate::mtl::parse_formula("(always 0 3 all)").unwrap(),
            3,
        )
        .unwrap();
        let before = lifted.set.complexity();
        let with = apply_mtl(&lifted, &clauses).unwrap();
        let after = with.set.complexity();
        assert_eq!(after.n_g - before.n_g, 0);
        assert_eq!(after.n_c - before.n_c, 1);
        // Empty clause list leaves the set untouched.
        let same = apply_mtl(&lifted, &[]).unwrap();
        assert_eq!(same.set.complexity(), before);
    }

    #[test]
    fn unresolvable_clause_coordinate() {
        let (a, b, w) = double_integrator(1);
        let map = one_region_map_4d();
        let sys = LtiSystem::new(
            a,
            b,
            w,
            DVector::zeros(4),
            vec![HybridZonotope::from_box(&[-1.0, -1.0], &[1.0, 1.0])],
        )
        .unwrap();
        let lifted = build_lifted(&sys, &MapSchedule::fixed(map), 2, &[]).unwrap();
        let clauses = crate::mtl::compile_cnf(
            &crate::mtl::parse_formula("(eventually 0 2 nosuch)").unwrap(),
            2,
        )
        .unwrap();
        let err = apply_mtl(&lifted, &clauses).unwrap_err();
        assert!(matches!(err, ReachError::UnresolvableCoordinate { .. }));
    }
}
