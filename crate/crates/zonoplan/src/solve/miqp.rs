//! MIQP assembly from a lifted reachable set and plan decoding.
//!
//! The program is `minimize z' P z` over `z` in the lifted feasible
//! set, with `P = blkdiag(Q, 0, R, Q, 0, ..., R, Q_N, 0)` placed by
//! the index bookkeeping (zeros over indicator blocks). Internally the
//! solvers work in factor space via the decode map `z = G xi + c`.

use nalgebra::{DMatrix, DVector};

use crate::mtl::{evaluate, MtlFormula, PropSet, PropTrace};
use crate::num::sparse::SpMat;
use crate::reach::{LiftedIndex, LiftedReachSet, MapSchedule, LtiSystem, PartitionKind};
use crate::set::FactorPoint;
use crate::solve::bnb::{solve_factor_bnb, BnbOptions, FactorProblem, SolveReport};
use crate::solve::{SolveError, SolveResult};

/// The assembled mixed-integer QP. Matrices live over the decoded
/// lifted vector (`p`) and the factor space (`a`, `b`, decode map).
#[derive(Debug, Clone, PartialEq)]
pub struct Miqp {
    /// Quadratic cost over the decoded lifted vector.
    pub p: SpMat,
    /// Decode map `z = decode_g [xi; delta] + decode_c`.
    pub decode_g: SpMat,
    pub decode_c: DVector<f64>,
    /// Equality system over the stacked factors `[xi; delta]`.
    pub a: SpMat,
    pub b: DVector<f64>,
    pub n_cont: usize,
    pub n_bin: usize,
    pub index: LiftedIndex,
}

impl Miqp {
    pub fn num_factors(&self) -> usize {
        self.n_cont + self.n_bin
    }

    /// Factor-space quadratic form of `z' P z` with `z = G xi + c`:
    /// `1/2 xi' (2 G'PG) xi + (2 G'Pc)' xi + c'Pc`.
    pub fn factor_problem(&self) -> FactorProblem {
        let pg = self.p.matmul(&self.decode_g);
        let gt = self.decode_g.transpose();
        let ptilde = gt.matmul(&pg).scale(2.0);
        let pc = self.p.matvec(&self.decode_c);
        let q = self.decode_g.tr_matvec(&pc).scale(2.0);
        let obj_const = self.decode_c.dot(&pc);
        FactorProblem {
            p: ptilde,
            q,
            a: self.a.clone(),
            b: self.b.clone(),
            obj_const,
            n_cont: self.n_cont,
            n_bin: self.n_bin,
        }
    }

    pub fn decode_point(&self, fp: &FactorPoint) -> DVector<f64> {
        let mut xi = DVector::zeros(self.num_factors());
        for i in 0..self.n_cont {
            xi[i] = fp.cont[i];
        }
        for j in 0..self.n_bin {
            xi[self.n_cont + j] = fp.bin[j];
        }
        self.decode_g.matvec(&xi) + &self.decode_c
    }

    pub fn objective_of(&self, fp: &FactorPoint) -> f64 {
        let z = self.decode_point(fp);
        z.dot(&self.p.matvec(&z))
    }
}

fn sym_min_eig(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Place the stage costs onto the lifted coordinates.
///
/// `q_stage` and `q_terminal` must be positive semidefinite
/// (eigenvalue floor -1e-10), `r_input` positive definite.
pub fn assemble(
    lifted: &LiftedReachSet,
    q_stage: &DMatrix<f64>,
    r_input: &DMatrix<f64>,
    q_terminal: &DMatrix<f64>,
) -> SolveResult<Miqp> {
    let idx = lifted.index;
    for (name, m, rows) in [
        ("Q", q_stage, idx.n_x),
        ("R", r_input, idx.n_u),
        ("Q_N", q_terminal, idx.n_x),
    ] {
        if m.nrows() != rows || m.ncols() != rows {
            return Err(SolveError::Shape(format!(
                "{name} is {}x{}, expected {rows}x{rows}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    let eig_q = sym_min_eig(q_stage);
    if eig_q < -1e-10 {
        return Err(SolveError::NotPsd {
            name: "Q",
            min_eig: eig_q,
        });
    }
    let eig_qn = sym_min_eig(q_terminal);
    if eig_qn < -1e-10 {
        return Err(SolveError::NotPsd {
            name: "Q_N",
            min_eig: eig_qn,
        });
    }
    let eig_r = sym_min_eig(r_input);
    if eig_r <= 0.0 {
        return Err(SolveError::NotPd {
            name: "R",
            min_eig: eig_r,
        });
    }

    let mut triplets = Vec::new();
    for k in 0..=idx.n_steps {
        let qm = if k == idx.n_steps { q_terminal } else { q_stage };
        for i in 0..idx.n_x {
            for j in 0..idx.n_x {
                if qm[(i, j)] != 0.0 {
                    triplets.push((idx.state(k, i), idx.state(k, j), qm[(i, j)]));
                }
            }
        }
        if k < idx.n_steps {
            for i in 0..idx.n_u {
                for j in 0..idx.n_u {
                    if r_input[(i, j)] != 0.0 {
                        triplets.push((idx.input(k, i), idx.input(k, j), r_input[(i, j)]));
                    }
                }
            }
        }
    }
    let p = SpMat::from_triplets(idx.dim(), idx.dim(), &triplets);

    let set = &lifted.set;
    let decode_g = SpMat::hstack(&[set.cont_generators(), set.bin_generators()]);
    let a = SpMat::hstack(&[set.con_cont(), set.con_bin()]);
    Ok(Miqp {
        p,
        decode_g,
        decode_c: set.center().clone(),
        a,
        b: set.con_rhs().clone(),
        n_cont: set.num_cont_gens(),
        n_bin: set.num_bin_gens(),
        index: idx,
    })
}

/// Solve the MIQP by branch and bound at the given relative gap.
pub fn solve_bnb(miqp: &Miqp, gap: f64, node_budget: usize) -> SolveResult<SolveReport> {
    if !(gap > 0.0 && gap <= 1.0) {
        return Err(SolveError::Shape(format!("gap {gap} outside (0, 1]")));
    }
    if node_budget == 0 {
        return Err(SolveError::Shape("node budget must be at least 1".into()));
    }
    let prob = miqp.factor_problem();
    let opts = BnbOptions {
        gap,
        node_budget,
        ..Default::default()
    };
    solve_factor_bnb(&prob, &opts)
}

/// A decoded, validated motion plan.
#[derive(Debug, Clone)]
pub struct PlanSolution {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    /// Exact 0/1 indicator rows, one per step.
    pub indicators: Vec<DVector<f64>>,
    pub objective: f64,
}

impl PlanSolution {
    /// Indicator rows as a proposition trace (region order).
    pub fn indicator_trace(&self) -> PropTrace {
        let steps = self.indicators.len();
        let props = self.indicators.first().map(|r| r.len()).unwrap_or(0);
        let mut t = PropTrace::new(steps, props);
        for (k, row) in self.indicators.iter().enumerate() {
            for p in 0..props {
                t.set(k, p, row[p] == 1.0);
            }
        }
        t
    }
}

/// Everything needed to check a decoded plan: the dynamics, the map
/// schedule (region geometry per step), and optionally the formula the
/// plan must satisfy.
pub struct ValidationCtx<'a> {
    pub sys: &'a LtiSystem,
    pub schedule: &'a MapSchedule,
    pub formula: Option<&'a MtlFormula>,
    /// Maximum dynamics residual; decode fails above it.
    pub dynamics_tol: f64,
}

impl<'a> ValidationCtx<'a> {
    pub fn new(sys: &'a LtiSystem, schedule: &'a MapSchedule, formula: Option<&'a MtlFormula>) -> Self {
        Self {
            sys,
            schedule,
            formula,
            dynamics_tol: 1e-9,
        }
    }
}

/// Decode a factor point into a plan and validate every invariant:
/// binary exactness, one-hot indicators, dynamics residual, indicator
/// and region-membership consistency, and formula satisfaction when a
/// formula is given. Validation failure is an error, never a warning.
pub fn decode(miqp: &Miqp, fp: &FactorPoint, ctx: &ValidationCtx) -> SolveResult<PlanSolution> {
    if fp.cont.len() != miqp.n_cont || fp.bin.len() != miqp.n_bin {
        return Err(SolveError::Shape(format!(
            "factor point ({}, {}) vs miqp ({}, {})",
            fp.cont.len(),
            fp.bin.len(),
            miqp.n_cont,
            miqp.n_bin
        )));
    }
    if fp.bin_fractionality() > 1e-6 {
        return Err(SolveError::DecodeValidation(format!(
            "binary factors fractional by {:.2e}",
            fp.bin_fractionality()
        )));
    }
    let z = miqp.decode_point(fp);
    let idx = miqp.index;
    let (states, bins, inputs) = idx.unstack(&z);

    // Indicators: snap to exact 0/1 and require one-hot rows.
    let mut indicators = Vec::with_capacity(bins.len());
    for (k, row) in bins.iter().enumerate() {
        let mut exact = DVector::zeros(row.len());
        let mut ones = 0;
        for j in 0..row.len() {
            let r = row[j].round();
            if (row[j] - r).abs() > 1e-6 {
                return Err(SolveError::DecodeValidation(format!(
                    "indicator ({k},{j}) = {} is not integral",
                    row[j]
                )));
            }
            exact[j] = r;
            if r == 1.0 {
                ones += 1;
            }
        }
        if ones != 1 {
            return Err(SolveError::DecodeValidation(format!(
                "indicator row {k} has {ones} active entries"
            )));
        }
        indicators.push(exact);
    }

    // Dynamics residual at every step.
    for k in 0..idx.n_steps {
        let r = ctx
            .sys
            .residual(&states[k], &inputs[k], &indicators[k], &states[k + 1]);
        if r > ctx.dynamics_tol {
            return Err(SolveError::DecodeValidation(format!(
                "dynamics residual {r:.3e} at step {k} exceeds {:.0e}",
                ctx.dynamics_tol
            )));
        }
    }

    // The active region must contain the state. Disjoint partitions
    // additionally pin the indicator to the unique containing region.
    for k in 0..=idx.n_steps {
        let map = ctx.schedule.at(k);
        let active = (0..idx.n_b)
            .find(|&j| indicators[k][j] == 1.0)
            .expect("one-hot row");
        let region = &map.regions[active];
        if !region.polytope.contains(&states[k], 1e-6) {
            return Err(SolveError::DecodeValidation(format!(
                "step {k}: active region `{}` does not contain the state",
                region.id
            )));
        }
        if map.kind == PartitionKind::Dcp {
            let containing = map.regions_containing(&states[k], -1e-9);
            if containing.len() == 1 && containing[0] != active {
                return Err(SolveError::DecodeValidation(format!(
                    "step {k}: indicator names `{}` but the state is interior to `{}`",
                    region.id, map.regions[containing[0]].id
                )));
            }
        }
    }

    let plan = PlanSolution {
        objective: z.dot(&miqp.p.matvec(&z)),
        states,
        inputs,
        indicators,
    };

    if let Some(formula) = ctx.formula {
        let props = PropSet::new(ctx.schedule.region_ids());
        let trace = plan.indicator_trace();
        let ok = evaluate(formula, &trace, 0, &props)?;
        if !ok {
            return Err(SolveError::DecodeValidation(
                "decoded plan does not satisfy the formula".into(),
            ));
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reach::{build_lifted, build_map, MapValidation, RegionRole, RegionSpec};
    use crate::set::HybridZonotope;

    fn simple_lifted() -> (LtiSystem, MapSchedule, LiftedReachSet) {
        let (a, b, w) = crate::reach::system::double_integrator(1);
        let ws_lo = vec![-5.0, -5.0, -2.0, -2.0];
        let ws_hi = vec![5.0, 5.0, 2.0, 2.0];
        let region = RegionSpec {
            id: "all".into(),
            polytope: crate::set::HPolytope::from_box(&ws_lo, &ws_hi),
            disturbance: DVector::zeros(4),
            role: RegionRole::Free,
        };
        let map = build_map(
            vec![region],
            crate::reach::PartitionKind::Dcp,
            &MapValidation {
                workspace_lo: ws_lo,
                workspace_hi: ws_hi,
                coverage_dims: vec![0, 1],
                coverage_resolution: 1.0,
                keepouts: vec![],
            },
        )
        .unwrap();
        let sys = LtiSystem::new(
            a,
            b,
            w,
            DVector::zeros(4),
            vec![HybridZonotope::from_box(&[-1.0, -1.0], &[1.0, 1.0])],
        )
        .unwrap();
        let schedule = MapSchedule::fixed(map);
        let lifted = build_lifted(&sys, &schedule, 2, &[]).unwrap();
        (sys, schedule, lifted)
    }

    #[test]
    fn cost_blocks_land_on_index_coordinates() {
        let (_, _, lifted) = simple_lifted();
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]));
        let r = DMatrix::identity(2, 2);
        let miqp = assemble(&lifted, &q, &r, &q).unwrap();
        let idx = miqp.index;
        // Velocity coordinates carry weight, positions and indicators
        // do not.
        assert_eq!(miqp.p.get(idx.state(0, 2), idx.state(0, 2)), 1.0);
        assert_eq!(miqp.p.get(idx.state(0, 0), idx.state(0, 0)), 0.0);
        assert_eq!(miqp.p.get(idx.bin(1, 0), idx.bin(1, 0)), 0.0);
        assert_eq!(miqp.p.get(idx.input(1, 0), idx.input(1, 0)), 1.0);
        assert_eq!(miqp.p.get(idx.state(2, 3), idx.state(2, 3)), 1.0);
    }

    #[test]
    fn zero_r_rejected() {
        let (_, _, lifted) = simple_lifted();
        let q = DMatrix::zeros(4, 4);
        let r = DMatrix::zeros(2, 2);
        let err = assemble(&lifted, &q, &r, &q).unwrap_err();
        assert!(matches!(err, SolveError::NotPd { name: "R", .. }));
    }

    #[test]
    fn decode_roundtrip_of_simulation() {
        let (sys, schedule, lifted) = simple_lifted();
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]));
        let r = DMatrix::identity(2, 2);
        let miqp = assemble(&lifted, &q, &r, &q).unwrap();
        let report = solve_bnb(&miqp, 0.01, 1000).unwrap();
        assert_eq!(
            report.status,
            crate::solve::bnb::SolveStatus::OptimalAtGap
        );
        let fp = report.incumbent.unwrap();
        let ctx = ValidationCtx::new(&sys, &schedule, None);
        let plan = decode(&miqp, &fp, &ctx).unwrap();
        // Staying at rest is optimal for this cost.
        assert!(plan.objective < 1e-6);
        assert_eq!(plan.states.len(), 3);
        assert_eq!(plan.inputs.len(), 2);
        for row in &plan.indicators {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
    }
}
