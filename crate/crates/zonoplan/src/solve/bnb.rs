//! Best-first branch and bound over binary factors with ADMM QP
//! relaxations.
//!
//! One KKT factorization per problem is shared by every node; nodes
//! only tighten factor bounds. Rows of the form `sum delta = 1` are
//! branched n-way on which indicator is one; remaining binaries branch
//! 0/1 on the most fractional value. Node selection is lowest bound
//! first with node id as the tie-break, which makes repeated solves
//! bit-identical.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::num::boxqp::{
    AdmmSettings, AffineProjector, QpInstance, QpStatus, QpWorkspace, WarmStart,
};
use crate::num::sparse::SpMat;
use crate::set::FactorPoint;
use crate::solve::SolveResult;

/// A mixed-binary QP in factor space:
/// `minimize 1/2 x' P x + q' x + const` over `A x = b`,
/// `x_cont in [0,1]`, `x_bin in {0,1}` (binaries are the trailing
/// `n_bin` coordinates).
#[derive(Debug, Clone)]
pub struct FactorProblem {
    pub p: SpMat,
    pub q: DVector<f64>,
    pub a: SpMat,
    pub b: DVector<f64>,
    pub obj_const: f64,
    pub n_cont: usize,
    pub n_bin: usize,
}

impl FactorProblem {
    pub fn num_factors(&self) -> usize {
        self.n_cont + self.n_bin
    }

    /// Rows `sum of a subset of binaries = 1` with no continuous
    /// involvement; disjoint groups only.
    pub fn one_hot_groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut used = vec![false; self.num_factors()];
        for i in 0..self.a.nrows() {
            if (self.b[i] - 1.0).abs() > 1e-12 {
                continue;
            }
            let mut cols = Vec::new();
            let mut ok = true;
            for (j, v) in self.a.row(i) {
                if j < self.n_cont || (v - 1.0).abs() > 1e-12 {
                    ok = false;
                    break;
                }
                cols.push(j);
            }
            if !ok || cols.is_empty() || cols.iter().any(|&j| used[j]) {
                continue;
            }
            for &j in &cols {
                used[j] = true;
            }
            groups.push(cols);
        }
        groups
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BnbOptions {
    /// Relative optimality gap at which the search stops.
    pub gap: f64,
    /// Maximum number of processed nodes.
    pub node_budget: usize,
    /// Binary integrality tolerance on relaxation solutions.
    pub int_tol: f64,
    /// Stop as soon as an incumbent at or below this objective exists
    /// (used by feasibility queries).
    pub target_objective: Option<f64>,
    pub admm: AdmmSettings,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            gap: 0.01,
            node_budget: 20_000,
            int_tol: 1e-6,
            target_objective: None,
            admm: AdmmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    OptimalAtGap,
    Infeasible,
    BudgetExhausted,
}

/// One line per processed node, in processing order.
#[derive(Debug, Clone)]
pub struct NodeLog {
    pub node: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub bound: f64,
    pub incumbent: f64,
    pub gap: f64,
}

impl NodeLog {
    /// The documented log line format: `node,depth,bound,incumbent,gap`.
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{:.9e},{:.9e},{:.6}",
            self.node, self.depth, self.bound, self.incumbent, self.gap
        )
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub incumbent: Option<FactorPoint>,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub wall_time: Duration,
    pub status: SolveStatus,
    pub log: Vec<NodeLog>,
}

struct Node {
    id: usize,
    parent: Option<usize>,
    depth: usize,
    bound: f64,
    lo: DVector<f64>,
    hi: DVector<f64>,
    warm: Option<Rc<WarmStart>>,
}

struct HeapEntry {
    bound: f64,
    depth: usize,
    id: usize,
    slot: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Reversed: BinaryHeap is a max-heap, we want lowest bound first.
    // Equal bounds (children inherit the parent's) break deeper-first
    // so the search plunges to an incumbent, then by lowest id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| self.depth.cmp(&other.depth))
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Safety margin subtracted from relaxation objectives so reported
/// bounds stay below the true optimum despite first-order solve
/// accuracy.
fn bound_slack(obj: f64) -> f64 {
    1e-7 * (1.0 + obj.abs())
}

/// Interior relaxations run at this multiple of the base tolerance;
/// their looser accuracy is covered by a matching bound slack.
const NODE_EPS_SCALE: f64 = 100.0;

fn node_bound_slack(obj: f64) -> f64 {
    1e-5 * (1.0 + obj.abs())
}

pub struct BnbSolver<'p> {
    prob: &'p FactorProblem,
    qp: QpWorkspace,
    projector: Option<AffineProjector>,
    groups: Vec<Vec<usize>>,
    group_of: Vec<Option<usize>>,
    rows: Vec<(Vec<(usize, f64)>, f64)>,
}

impl<'p> BnbSolver<'p> {
    pub fn new(prob: &'p FactorProblem, admm: AdmmSettings) -> SolveResult<Self> {
        let qp = QpWorkspace::new(prob.p.clone(), prob.a.clone(), admm)?;
        let projector = if prob.a.nrows() > 0 {
            Some(AffineProjector::new(prob.a.clone())?)
        } else {
            None
        };
        let groups = prob.one_hot_groups();
        let mut group_of = vec![None; prob.num_factors()];
        for (g, cols) in groups.iter().enumerate() {
            for &c in cols {
                group_of[c] = Some(g);
            }
        }
        let rows: Vec<(Vec<(usize, f64)>, f64)> = (0..prob.a.nrows())
            .map(|i| (prob.a.row(i).collect(), prob.b[i]))
            .collect();
        Ok(Self {
            prob,
            qp,
            projector,
            groups,
            group_of,
            rows,
        })
    }

    /// Tighten bounds by interval propagation over the equality rows,
    /// iterated to a fixpoint; binary factors snap to 0/1 when their
    /// interval excludes the other value. Returns false when a row is
    /// proven unsatisfiable over the node box.
    fn propagate(&self, lo: &mut DVector<f64>, hi: &mut DVector<f64>) -> bool {
        const TOL: f64 = 1e-9;
        let nc = self.prob.n_cont;
        for _ in 0..16 {
            let mut changed = false;
            for (cols, b) in &self.rows {
                let mut smin = 0.0;
                let mut smax = 0.0;
                for &(j, a) in cols {
                    let (clo, chi) = if a >= 0.0 {
                        (a * lo[j], a * hi[j])
                    } else {
                        (a * hi[j], a * lo[j])
                    };
                    smin += clo;
                    smax += chi;
                }
                if smin > b + TOL || smax < b - TOL {
                    return false;
                }
                for &(j, a) in cols {
                    if a.abs() < 1e-12 {
                        continue;
                    }
                    let (clo, chi) = if a >= 0.0 {
                        (a * lo[j], a * hi[j])
                    } else {
                        (a * hi[j], a * lo[j])
                    };
                    // a x_j = b - (others) with others in
                    // [smin - clo, smax - chi].
                    let t_lo = b - (smax - chi);
                    let t_hi = b - (smin - clo);
                    let (mut nlo, mut nhi) = if a > 0.0 {
                        (t_lo / a, t_hi / a)
                    } else {
                        (t_hi / a, t_lo / a)
                    };
                    if j >= nc {
                        // Binary factor: snap the interval to 0/1.
                        if nlo > TOL {
                            nlo = 1.0;
                        }
                        if nhi < 1.0 - TOL {
                            nhi = 0.0;
                        }
                    }
                    if nlo > lo[j] + 1e-12 {
                        lo[j] = nlo.min(hi[j] + TOL);
                        changed = true;
                    }
                    if nhi < hi[j] - 1e-12 {
                        hi[j] = nhi.max(lo[j] - TOL);
                        changed = true;
                    }
                    if lo[j] > hi[j] + TOL {
                        return false;
                    }
                    // Collapse numerically inverted intervals.
                    if lo[j] > hi[j] {
                        let mid = 0.5 * (lo[j] + hi[j]);
                        lo[j] = mid;
                        hi[j] = mid;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        true
    }

    pub fn one_hot_groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    fn instance<'a>(&'a self, lo: &'a DVector<f64>, hi: &'a DVector<f64>) -> QpInstance<'a> {
        QpInstance {
            q: &self.prob.q,
            b: &self.prob.b,
            lo,
            hi,
            obj_const: self.prob.obj_const,
        }
    }

    /// Clean a near-feasible point: project onto the equality rows,
    /// clamping into the node box, until the residual is tiny.
    fn refine(&self, x: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
        match &self.projector {
            Some(p) => p.refine(x, &self.prob.b, lo, hi, 1e-11, 200).0,
            None => {
                let mut y = x.clone();
                for i in 0..y.len() {
                    y[i] = y[i].clamp(lo[i], hi[i]);
                }
                y
            }
        }
    }

    fn objective_at(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&self.prob.p.matvec(x)) + self.prob.q.dot(x) + self.prob.obj_const
    }

    /// Solve a fully pinned (leaf) QP and return the cleaned candidate
    /// if it is feasible.
    pub(crate) fn try_leaf(
        &self,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
        warm: Option<&WarmStart>,
    ) -> Option<(f64, DVector<f64>)> {
        let mut lo = lo.clone();
        let mut hi = hi.clone();
        if !self.propagate(&mut lo, &mut hi) {
            return None;
        }
        let (lo, hi) = (&lo, &hi);
        let sol = self.qp.solve(&self.instance(lo, hi), warm);
        if sol.status != QpStatus::Solved {
            return None;
        }
        let x = self.refine(&sol.x, lo, hi);
        let residual = if self.prob.a.nrows() > 0 {
            (self.prob.a.matvec(&x) - &self.prob.b).amax()
        } else {
            0.0
        };
        if residual > 1e-7 {
            return None;
        }
        Some((self.objective_at(&x), x))
    }

    /// Round a relaxation point to a binary assignment: each one-hot
    /// group takes its largest entry (ties to the smallest index),
    /// free binaries round to the nearest integer.
    fn rounded_bounds(
        &self,
        x: &DVector<f64>,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let mut rlo = lo.clone();
        let mut rhi = hi.clone();
        let nc = self.prob.n_cont;
        let mut grouped = vec![false; self.prob.num_factors()];
        for cols in &self.groups {
            let mut best = None;
            let mut best_v = f64::NEG_INFINITY;
            for &c in cols {
                grouped[c] = true;
                // Respect already-fixed members.
                let v = x[c].clamp(lo[c], hi[c]);
                if v > best_v + 1e-12 {
                    best_v = v;
                    best = Some(c);
                }
            }
            for &c in cols {
                let v: f64 = if Some(c) == best { 1.0 } else { 0.0 };
                // Never violate the node's fixings.
                let v = v.clamp(lo[c], hi[c]);
                rlo[c] = v;
                rhi[c] = v;
            }
        }
        for j in nc..self.prob.num_factors() {
            if !grouped[j] {
                let v = f64::clamp(x[j].clamp(lo[j], hi[j]).round(), lo[j], hi[j]);
                rlo[j] = v;
                rhi[j] = v;
            }
        }
        (rlo, rhi)
    }

    pub fn solve(&self, opts: &BnbOptions) -> SolveReport {
        let start = Instant::now();
        let m = self.prob.num_factors();
        let nc = self.prob.n_cont;

        let mut nodes: Vec<Node> = Vec::new();
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
        let root = Node {
            id: 0,
            parent: None,
            depth: 0,
            bound: f64::NEG_INFINITY,
            lo: DVector::zeros(m),
            hi: DVector::from_element(m, 1.0),
            warm: None,
        };
        heap.push(HeapEntry {
            bound: root.bound,
            depth: 0,
            id: 0,
            slot: 0,
        });
        nodes.push(root);

        let mut next_id = 1usize;
        let mut incumbent: Option<(f64, DVector<f64>, DVector<f64>, DVector<f64>)> = None;
        let mut processed = 0usize;
        let mut degraded = false;
        let mut log = Vec::new();

        let inc_obj = |inc: &Option<(f64, DVector<f64>, DVector<f64>, DVector<f64>)>| {
            inc.as_ref().map(|s| s.0).unwrap_or(f64::INFINITY)
        };
        let prune_threshold = |inc: f64, gap: f64| {
            if inc.is_finite() {
                inc - gap * inc.abs().max(1e-10)
            } else {
                f64::INFINITY
            }
        };
        let rel_gap = |inc: f64, bound: f64| {
            if inc.is_finite() {
                ((inc - bound) / inc.abs().max(1e-10)).max(0.0)
            } else {
                f64::INFINITY
            }
        };

        let mut status = SolveStatus::OptimalAtGap;
        let mut global_bound = f64::NEG_INFINITY;

        while let Some(entry) = heap.pop() {
            let slot = entry.slot;
            let (mut node_lo, mut node_hi, parent_bound, depth, parent, warm, id) = {
                let n = &nodes[slot];
                (
                    n.lo.clone(),
                    n.hi.clone(),
                    n.bound,
                    n.depth,
                    n.parent,
                    n.warm.clone(),
                    n.id,
                )
            };
            // This node has the lowest bound of all open nodes, so
            // its bound is the global lower bound right now.
            global_bound = parent_bound;

            let inc = inc_obj(&incumbent);
            if parent_bound >= prune_threshold(inc, opts.gap) {
                // Best-first order: nothing below this can improve.
                status = SolveStatus::OptimalAtGap;
                global_bound = parent_bound;
                break;
            }
            if processed >= opts.node_budget {
                status = SolveStatus::BudgetExhausted;
                break;
            }
            processed += 1;

            // Bound tightening; rows proven empty skip the QP solve.
            if !self.propagate(&mut node_lo, &mut node_hi) {
                log.push(NodeLog {
                    node: id,
                    parent,
                    depth,
                    bound: f64::INFINITY,
                    incumbent: inc,
                    gap: rel_gap(inc, global_bound),
                });
                nodes[slot].warm = None;
                continue;
            }

            let sol = self.qp.solve_with_eps(
                &self.instance(&node_lo, &node_hi),
                warm.as_deref(),
                NODE_EPS_SCALE,
            );
            if std::env::var("BNB_PROGRESS").is_ok() {
                eprintln!(
                    "node {id} depth {depth} status {:?} iters {} obj {:.4} inc {:.4} open {}",
                    sol.status,
                    sol.iterations,
                    sol.objective,
                    inc,
                    heap.len()
                );
            }
            let node_bound = match sol.status {
                QpStatus::PrimalInfeasible => {
                    log.push(NodeLog {
                        node: id,
                        parent,
                        depth,
                        bound: f64::INFINITY,
                        incumbent: inc,
                        gap: rel_gap(inc, global_bound),
                    });
                    nodes[slot].warm = None;
                    continue;
                }
                // Unresolved node: the bound cannot be trusted, so the
                // parent's is inherited and the run is marked degraded.
                QpStatus::MaxIter => {
                    degraded = true;
                    parent_bound
                }
                QpStatus::Solved => {
                    (sol.objective - node_bound_slack(sol.objective)).max(parent_bound)
                }
            };

            log.push(NodeLog {
                node: id,
                parent,
                depth,
                bound: node_bound,
                incumbent: inc,
                gap: rel_gap(inc, node_bound),
            });

            if node_bound >= prune_threshold(inc_obj(&incumbent), opts.gap) {
                nodes[slot].warm = None;
                continue;
            }

            // Integral relaxation: pin and accept as incumbent.
            // Already-pinned binaries never branch again; residual
            // fractionality there is solver noise, not a decision.
            let mut frac_best: Option<(f64, usize)> = None;
            for j in nc..m {
                if node_hi[j] - node_lo[j] < 0.5 {
                    continue;
                }
                let f = (sol.x[j] - sol.x[j].round()).abs();
                if frac_best.map(|(bf, _)| f > bf + 1e-15).unwrap_or(true) && f > opts.int_tol {
                    frac_best = Some((f, j));
                }
            }

            let warm_rc = Rc::new(WarmStart {
                x: sol.x.clone(),
                z: {
                    let ax = self.prob.a.matvec(&sol.x);
                    let mut z = DVector::zeros(self.prob.a.nrows() + m);
                    for i in 0..self.prob.a.nrows() {
                        z[i] = ax[i];
                    }
                    for i in 0..m {
                        z[self.prob.a.nrows() + i] = sol.x[i];
                    }
                    z
                },
                y: sol.y.clone(),
            });

            if frac_best.is_none() {
                let (rlo, rhi) = self.rounded_bounds(&sol.x, &node_lo, &node_hi);
                if let Some((obj, x)) = self.try_leaf(&rlo, &rhi, Some(&warm_rc)) {
                    if obj < inc_obj(&incumbent) - 1e-12 {
                        incumbent = Some((obj, x, rlo, rhi));
                    }
                }
                nodes[slot].warm = None;
            } else {
                // Rounding heuristic at the root while no incumbent
                // exists (the plunge finds incumbents below).
                if depth == 0 && incumbent.is_none() {
                    let (rlo, rhi) = self.rounded_bounds(&sol.x, &node_lo, &node_hi);
                    if let Some((obj, x)) = self.try_leaf(&rlo, &rhi, Some(&warm_rc)) {
                        incumbent = Some((obj, x, rlo, rhi));
                    }
                }
                let (_, branch_j) = frac_best.unwrap();
                let children: Vec<(DVector<f64>, DVector<f64>)> = match self.group_of[branch_j] {
                    Some(g) => {
                        // n-way: child per group member that can still
                        // be the active indicator, most promising (by
                        // relaxation value) first so the plunge takes
                        // it; ties keep the smaller index first.
                        let cols = &self.groups[g];
                        let mut open: Vec<usize> =
                            cols.iter().copied().filter(|&c| node_hi[c] > 0.5).collect();
                        open.sort_by(|&a, &b| {
                            sol.x[b].total_cmp(&sol.x[a]).then_with(|| a.cmp(&b))
                        });
                        open.iter()
                            .map(|&sel| {
                                let mut lo = node_lo.clone();
                                let mut hi = node_hi.clone();
                                for &c in cols {
                                    let v = if c == sel { 1.0 } else { 0.0 };
                                    lo[c] = v;
                                    hi[c] = v;
                                }
                                (lo, hi)
                            })
                            .collect()
                    }
                    None => [0.0, 1.0]
                        .iter()
                        .map(|&v| {
                            let mut lo = node_lo.clone();
                            let mut hi = node_hi.clone();
                            lo[branch_j] = v;
                            hi[branch_j] = v;
                            (lo, hi)
                        })
                        .collect(),
                };
                for (clo, chi) in children {
                    let child = Node {
                        id: next_id,
                        parent: Some(id),
                        depth: depth + 1,
                        bound: node_bound,
                        lo: clo,
                        hi: chi,
                        warm: Some(warm_rc.clone()),
                    };
                    next_id += 1;
                    heap.push(HeapEntry {
                        bound: child.bound,
                        depth: child.depth,
                        id: child.id,
                        slot: nodes.len(),
                    });
                    nodes.push(child);
                }
                nodes[slot].warm = None;
            }

            // Global termination checks.
            let inc = inc_obj(&incumbent);
            let open_bound = heap.peek().map(|e| e.bound).unwrap_or(f64::INFINITY);
            global_bound = open_bound.min(inc);
            if inc.is_finite() {
                if let Some(target) = opts.target_objective {
                    if inc <= target {
                        status = SolveStatus::OptimalAtGap;
                        break;
                    }
                }
                if rel_gap(inc, global_bound) <= opts.gap {
                    status = SolveStatus::OptimalAtGap;
                    break;
                }
            }
        }

        if heap.is_empty() {
            // Tree exhausted: the incumbent (if any) is optimal up to
            // the leaf solve accuracy, which the slack absorbs.
            let inc = inc_obj(&incumbent);
            global_bound = if inc.is_finite() {
                inc - bound_slack(inc)
            } else {
                inc
            };
        }
        let (objective, incumbent_fp) = match &incumbent {
            Some((obj, x, _, _)) => {
                let cont = DVector::from_iterator(nc, x.iter().take(nc).copied());
                let bin = DVector::from_iterator(
                    self.prob.n_bin,
                    x.iter().skip(nc).map(|v| v.round()),
                );
                (*obj, Some(FactorPoint::new(cont, bin)))
            }
            None => (f64::INFINITY, None),
        };
        let status = if degraded {
            SolveStatus::BudgetExhausted
        } else if incumbent.is_none() && status != SolveStatus::BudgetExhausted {
            SolveStatus::Infeasible
        } else {
            status
        };
        let bound = if objective.is_finite() {
            global_bound.min(objective)
        } else {
            global_bound
        };
        let gap = if objective.is_finite() {
            ((objective - bound) / objective.abs().max(1e-10)).max(0.0)
        } else {
            f64::INFINITY
        };
        SolveReport {
            incumbent: incumbent_fp,
            objective,
            bound,
            gap,
            nodes: processed,
            wall_time: start.elapsed(),
            status,
            log,
        }
    }
}

/// Solve a factor-space mixed-binary QP by branch and bound.
pub fn solve_factor_bnb(prob: &FactorProblem, opts: &BnbOptions) -> SolveResult<SolveReport> {
    let solver = BnbSolver::new(prob, opts.admm)?;
    Ok(solver.solve(opts))
}
