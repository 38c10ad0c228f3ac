//! H-rep polytope encodings of MTL operators over binary region
//! indicators.
//!
//! Each operator's feasible set is a small polytope over the lifted
//! coordinates `(time step, region)` it binds:
//!
//! ```text
//!   pi:          xi = 1            (equality)
//!   not pi:      xi = 0            (equality)
//!   and:         xi1 + xi2 = 2     (equality)
//!   or:          -xi1 - xi2 <= -1  (inequality)
//!   eventually:  -sum xi <= -1     (inequality)
//!   always:      sum xi = tau      (equality)
//!   until:       [L1 L2] stacked, tau inequalities
//! ```
//!
//! A negated literal inside an operator substitutes `(1 - xi)` into the
//! rows, which keeps the H-rep form and adds no binary factors.

use nalgebra::DVector;

use crate::mtl::formula::{MtlFormula, PropSet, PropTrace};
use crate::mtl::{MtlError, MtlResult};
use crate::num::sparse::SpMat;
use crate::set::{Complexity, HPolytope};

/// A proposition or its negation; the operand fragment accepted inside
/// temporal operators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Literal {
    pub prop: String,
    pub negated: bool,
}

impl Literal {
    pub fn pos(prop: impl Into<String>) -> Self {
        Self {
            prop: prop.into(),
            negated: false,
        }
    }

    pub fn neg(prop: impl Into<String>) -> Self {
        Self {
            prop: prop.into(),
            negated: true,
        }
    }

    pub fn from_formula(f: &MtlFormula) -> Option<Literal> {
        match f {
            MtlFormula::Prop(p) => Some(Literal::pos(p.clone())),
            MtlFormula::Not(inner) => match inner.as_ref() {
                MtlFormula::Prop(p) => Some(Literal::neg(p.clone())),
                _ => None,
            },
            _ => None,
        }
    }

    /// Coefficient and offset of the literal as an affine function of
    /// its indicator: `lit = coeff * xi + offset`.
    fn affine(&self) -> (f64, f64) {
        if self.negated {
            (-1.0, 1.0)
        } else {
            (1.0, 0.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseKind {
    Prop,
    Neg,
    And,
    Or,
    Until { tau: usize },
    Eventually,
    Always,
}

impl ClauseKind {
    /// Expected representational growth per intersected clause.
    pub fn table_delta(&self) -> Complexity {
        match *self {
            ClauseKind::Prop | ClauseKind::Neg | ClauseKind::And | ClauseKind::Always => {
                Complexity {
                    n_g: 0,
                    n_b: 0,
                    n_c: 1,
                }
            }
            ClauseKind::Or | ClauseKind::Eventually => Complexity {
                n_g: 1,
                n_b: 0,
                n_c: 1,
            },
            ClauseKind::Until { tau } => Complexity {
                n_g: tau,
                n_b: 0,
                n_c: tau,
            },
        }
    }
}

/// An operator's feasible space together with the lifted-space
/// coordinates each polytope dimension binds to.
#[derive(Debug, Clone)]
pub struct OperatorPolytope {
    pub poly: HPolytope,
    /// `(time step, region id)` per polytope dimension; unique.
    pub coords: Vec<(usize, String)>,
    pub kind: ClauseKind,
}

impl OperatorPolytope {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Growth the generalized intersection with this polytope causes:
    /// one continuous generator per inequality, one constraint per row.
    pub fn complexity_delta(&self) -> Complexity {
        Complexity {
            n_g: self.poly.num_ineq(),
            n_b: 0,
            n_c: self.poly.num_ineq() + self.poly.num_eq(),
        }
    }

    /// Membership of an indicator assignment over `coords`.
    ///
    /// The tolerance only absorbs float rounding in the `1/i` until
    /// coefficients; true violations are quantized at `1/tau` or
    /// coarser, far above it.
    pub fn feasible(&self, assignment: &[f64]) -> bool {
        let x = DVector::from_column_slice(assignment);
        self.poly.violation(&x) <= 1e-9
    }

    fn check_horizon(&self, horizon: usize, op: &'static str) -> MtlResult<()> {
        for &(step, _) in &self.coords {
            if step > horizon {
                return Err(MtlError::HorizonOverrun {
                    op,
                    t1: 0,
                    t2: 0,
                    k: step,
                    needed: step,
                    horizon,
                });
            }
        }
        Ok(())
    }
}

/// Single-row polytope helper: `coeffs . x (<=|=) rhs`.
fn one_row(coeffs: Vec<f64>, rhs: f64, equality: bool) -> HPolytope {
    let dim = coeffs.len();
    let triplets: Vec<(usize, usize, f64)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (0, j, *v))
        .collect();
    let m = SpMat::from_triplets(1, dim, &triplets);
    let r = DVector::from_vec(vec![rhs]);
    if equality {
        HPolytope::equalities(m, r).expect("one-row polytope")
    } else {
        HPolytope::inequalities(m, r).expect("one-row polytope")
    }
}

/// Proposition or negation at step `k`: `xi = 1` or `xi = 0`.
pub fn encode_prop(lit: &Literal, k: usize) -> OperatorPolytope {
    let rhs = if lit.negated { 0.0 } else { 1.0 };
    OperatorPolytope {
        poly: one_row(vec![1.0], rhs, true),
        coords: vec![(k, lit.prop.clone())],
        kind: if lit.negated {
            ClauseKind::Neg
        } else {
            ClauseKind::Prop
        },
    }
}

/// Conjunction of two literals at step `k`: `lit1 + lit2 = 2`.
pub fn encode_and(a: &Literal, b: &Literal, k: usize) -> OperatorPolytope {
    let (ca, da) = a.affine();
    let (cb, db) = b.affine();
    OperatorPolytope {
        poly: one_row(vec![ca, cb], 2.0 - da - db, true),
        coords: vec![(k, a.prop.clone()), (k, b.prop.clone())],
        kind: ClauseKind::And,
    }
}

/// Disjunction of two literals at step `k`: `-lit1 - lit2 <= -1`.
pub fn encode_or(a: &Literal, b: &Literal, k: usize) -> OperatorPolytope {
    let (ca, da) = a.affine();
    let (cb, db) = b.affine();
    OperatorPolytope {
        poly: one_row(vec![-ca, -cb], -1.0 + da + db, false),
        coords: vec![(k, a.prop.clone()), (k, b.prop.clone())],
        kind: ClauseKind::Or,
    }
}

/// Timed until over the window `[[k+t1, k+t2]]`, `tau = t2 - t1 + 1`
/// rows over `2 tau` coordinates `[f-block, g-block]`.
///
/// Row `i < tau-1` (one per t strictly inside the window):
/// `g_{i+1} <= sum_{j<=i} (f_j / (i+1) + g_j)`; the last row enforces
/// `sum g >= 1`. The first operand may be negated; the second is a
/// plain proposition.
pub fn encode_until(
    f: &Literal,
    g: &str,
    k: usize,
    t1: usize,
    t2: usize,
) -> MtlResult<OperatorPolytope> {
    if t1 > t2 {
        return Err(MtlError::BadInterval { t1, t2 });
    }
    let tau = t2 - t1 + 1;
    let (cf, df) = f.affine();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = vec![0.0; tau];
    for i in 0..tau.saturating_sub(1) {
        let w = 1.0 / (i + 1) as f64;
        for j in 0..=i {
            // L1 block (f columns), with negation substituted.
            triplets.push((i, j, -w * cf));
            // L2 block (g columns).
            triplets.push((i, tau + j, -1.0));
        }
        triplets.push((i, tau + i + 1, 1.0));
        // The constant from substituting lit = cf*xi + df moves to the
        // rhs: the i+1 copies of w*df sum to df.
        rhs[i] = df;
    }
    // Last row: -sum g <= -1.
    for j in 0..tau {
        triplets.push((tau - 1, tau + j, -1.0));
    }
    rhs[tau - 1] = -1.0;

    let poly = HPolytope::inequalities(
        SpMat::from_triplets(tau, 2 * tau, &triplets),
        DVector::from_vec(rhs),
    )
    .expect("until polytope");
    let mut coords: Vec<(usize, String)> = (t1..=t2).map(|t| (k + t, f.prop.clone())).collect();
    coords.extend((t1..=t2).map(|t| (k + t, g.to_string())));
    Ok(OperatorPolytope {
        poly,
        coords,
        kind: ClauseKind::Until { tau },
    })
}

/// Eventually over the window: a single inequality `-sum lit <= -1`.
pub fn encode_eventually(
    f: &Literal,
    k: usize,
    t1: usize,
    t2: usize,
) -> MtlResult<OperatorPolytope> {
    if t1 > t2 {
        return Err(MtlError::BadInterval { t1, t2 });
    }
    let tau = t2 - t1 + 1;
    let (cf, df) = f.affine();
    let coeffs = vec![-cf; tau];
    let rhs = -1.0 + tau as f64 * df;
    Ok(OperatorPolytope {
        poly: one_row(coeffs, rhs, false),
        coords: (t1..=t2).map(|t| (k + t, f.prop.clone())).collect(),
        kind: ClauseKind::Eventually,
    })
}

/// Always over the window: a single equality `sum lit = tau`.
pub fn encode_always(f: &Literal, k: usize, t1: usize, t2: usize) -> MtlResult<OperatorPolytope> {
    if t1 > t2 {
        return Err(MtlError::BadInterval { t1, t2 });
    }
    let tau = t2 - t1 + 1;
    let (cf, df) = f.affine();
    let coeffs = vec![cf; tau];
    let rhs = tau as f64 - tau as f64 * df;
    Ok(OperatorPolytope {
        poly: one_row(coeffs, rhs, true),
        coords: (t1..=t2).map(|t| (k + t, f.prop.clone())).collect(),
        kind: ClauseKind::Always,
    })
}

fn flatten_clauses<'f>(f: &'f MtlFormula, out: &mut Vec<&'f MtlFormula>) {
    match f {
        MtlFormula::True => {}
        MtlFormula::And(a, b) => {
            // A conjunction of two literals is itself a supported
            // clause (one equality row); anything else splits.
            if Literal::from_formula(a).is_some() && Literal::from_formula(b).is_some() {
                out.push(f);
            } else {
                flatten_clauses(a, out);
                flatten_clauses(b, out);
            }
        }
        other => out.push(other),
    }
}

fn encode_clause(clause: &MtlFormula) -> MtlResult<OperatorPolytope> {
    let unsupported = || MtlError::UnsupportedClause(clause.to_string());
    if let Some(lit) = Literal::from_formula(clause) {
        return Ok(encode_prop(&lit, 0));
    }
    match clause {
        MtlFormula::And(a, b) => {
            let la = Literal::from_formula(a).ok_or_else(unsupported)?;
            let lb = Literal::from_formula(b).ok_or_else(unsupported)?;
            Ok(encode_and(&la, &lb, 0))
        }
        MtlFormula::Or(a, b) => {
            let la = Literal::from_formula(a).ok_or_else(unsupported)?;
            let lb = Literal::from_formula(b).ok_or_else(unsupported)?;
            Ok(encode_or(&la, &lb, 0))
        }
        MtlFormula::Until(a, b, t1, t2) => {
            let la = Literal::from_formula(a).ok_or_else(unsupported)?;
            let g = match b.as_ref() {
                MtlFormula::Prop(p) => p.clone(),
                _ => return Err(unsupported()),
            };
            encode_until(&la, &g, 0, *t1, *t2)
        }
        MtlFormula::Eventually(a, t1, t2) => {
            let la = Literal::from_formula(a).ok_or_else(unsupported)?;
            encode_eventually(&la, 0, *t1, *t2)
        }
        MtlFormula::Always(a, t1, t2) => {
            let la = Literal::from_formula(a).ok_or_else(unsupported)?;
            encode_always(&la, 0, *t1, *t2)
        }
        _ => Err(unsupported()),
    }
}

/// Compile a conjunction of supported clauses into one operator
/// polytope per conjunct, all evaluated at step 0. The supported
/// fragment is conjunctions of literals, literal pairs under and/or,
/// and until/eventually/always over literals (until's second operand
/// a plain proposition); deeper nesting is rejected.
pub fn compile_cnf(f: &MtlFormula, horizon: usize) -> MtlResult<Vec<OperatorPolytope>> {
    let mut clauses = Vec::new();
    flatten_clauses(f, &mut clauses);
    let mut out = Vec::with_capacity(clauses.len());
    for clause in clauses {
        let op = encode_clause(clause)?;
        let name: &'static str = match op.kind {
            ClauseKind::Prop => "prop",
            ClauseKind::Neg => "not",
            ClauseKind::And => "and",
            ClauseKind::Or => "or",
            ClauseKind::Until { .. } => "until",
            ClauseKind::Eventually => "eventually",
            ClauseKind::Always => "always",
        };
        op.check_horizon(horizon, name)?;
        out.push(op);
    }
    Ok(out)
}

/// One row of the exhaustive encoding-vs-semantics comparison.
#[derive(Debug, Clone)]
pub struct OperatorCheck {
    pub operator: &'static str,
    pub tau: usize,
    pub assignments: usize,
    pub mismatches: usize,
}

/// Exhaustively compare polytope membership against trace semantics
/// for every operator and every window length up to `tau_max`.
/// `negated_first` additionally runs the temporal operators with a
/// negated first operand (the phi_A-style clause shape).
pub fn operator_equivalence_suite(tau_max: usize, negated_first: bool) -> Vec<OperatorCheck> {
    let props = PropSet::new(vec!["f".into(), "g".into()]);
    let mut out = Vec::new();
    for tau in 1..=tau_max {
        for t1 in [0usize, 1] {
            let t2 = t1 + tau - 1;
            let steps = t2 + 1;

            // Boolean operators bind step t2 and are evaluated
            // there; temporal operators are evaluated at k = 0 with
            // window [t1, t2].
            let lit_f = Literal::pos("f");
            let lit_g = Literal::pos("g");
            let cases: Vec<(&'static str, OperatorPolytope, MtlFormula, usize)> = {
                let mut v = vec![
                    ("prop", encode_prop(&lit_f, t2), MtlFormula::prop("f"), t2),
                    (
                        "not",
                        encode_prop(&Literal::neg("f"), t2),
                        MtlFormula::not(MtlFormula::prop("f")),
                        t2,
                    ),
                    (
                        "and",
                        encode_and(&lit_f, &lit_g, t2),
                        MtlFormula::and(MtlFormula::prop("f"), MtlFormula::prop("g")),
                        t2,
                    ),
                    (
                        "or",
                        encode_or(&lit_f, &lit_g, t2),
                        MtlFormula::or(MtlFormula::prop("f"), MtlFormula::prop("g")),
                        t2,
                    ),
                    (
                        "until",
                        encode_until(&lit_f, "g", 0, t1, t2).unwrap(),
                        MtlFormula::until(MtlFormula::prop("f"), MtlFormula::prop("g"), t1, t2)
                            .unwrap(),
                        0,
                    ),
                    (
                        "eventually",
                        encode_eventually(&lit_f, 0, t1, t2).unwrap(),
                        MtlFormula::eventually(MtlFormula::prop("f"), t1, t2).unwrap(),
                        0,
                    ),
                    (
                        "always",
                        encode_always(&lit_f, 0, t1, t2).unwrap(),
                        MtlFormula::always(MtlFormula::prop("f"), t1, t2).unwrap(),
                        0,
                    ),
                ];
                if negated_first {
                    let nf = Literal::neg("f");
                    let not_f = MtlFormula::not(MtlFormula::prop("f"));
                    v.push((
                        "until-neg",
                        encode_until(&nf, "g", 0, t1, t2).unwrap(),
                        MtlFormula::until(not_f.clone(), MtlFormula::prop("g"), t1, t2).unwrap(),
                        0,
                    ));
                    v.push((
                        "eventually-neg",
                        encode_eventually(&nf, 0, t1, t2).unwrap(),
                        MtlFormula::eventually(not_f.clone(), t1, t2).unwrap(),
                        0,
                    ));
                    v.push((
                        "always-neg",
                        encode_always(&nf, 0, t1, t2).unwrap(),
                        MtlFormula::always(not_f, t1, t2).unwrap(),
                        0,
                    ));
                }
                v
            };

            for (name, op, formula, eval_k) in cases {
                // Enumerate all assignments of the columns the
                // operator touches (other steps stay 0).
                let touched: Vec<(usize, usize)> = op
                    .coords
                    .iter()
                    .map(|(step, prop)| (*step, props.index_of(prop).unwrap()))
                    .collect();
                let bits = touched.len();
                let mut mismatches = 0;
                for mask in 0..(1usize << bits) {
                    let mut trace = PropTrace::new(steps, 2);
                    let mut assignment = vec![0.0; bits];
                    for (b, &(step, col)) in touched.iter().enumerate() {
                        let v = (mask >> b) & 1 == 1;
                        trace.set(step, col, v);
                        assignment[b] = if v { 1.0 } else { 0.0 };
                    }
                    let in_poly = op.feasible(&assignment);
                    let sat =
                        crate::mtl::formula::evaluate(&formula, &trace, eval_k, &props).unwrap();
                    if in_poly != sat {
                        mismatches += 1;
                    }
                }
                out.push(OperatorCheck {
                    operator: name,
                    tau,
                    assignments: 1usize << bits,
                    mismatches,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mtl::parse_formula;

    #[test]
    fn prop_polytope_structure() {
        let op = encode_prop(&Literal::pos("p"), 3);
        assert_eq!(op.coords, vec![(3, "p".to_string())]);
        assert!(op.feasible(&[1.0]));
        assert!(!op.feasible(&[0.0]));
        let neg = encode_prop(&Literal::neg("p"), 3);
        assert!(neg.feasible(&[0.0]));
        assert!(!neg.feasible(&[1.0]));
    }

    #[test]
    fn or_feasible_corners() {
        let op = encode_or(&Literal::pos("a"), &Literal::pos("b"), 0);
        assert!(!op.feasible(&[0.0, 0.0]));
        assert!(op.feasible(&[0.0, 1.0]));
        assert!(op.feasible(&[1.0, 0.0]));
        assert!(op.feasible(&[1.0, 1.0]));
    }

    #[test]
    fn and_only_both() {
        let op = encode_and(&Literal::pos("a"), &Literal::pos("b"), 0);
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)] {
            assert!(!op.feasible(&[a, b]));
        }
        assert!(op.feasible(&[1.0, 1.0]));
    }

    #[test]
    fn until_hand_cases_tau3() {
        let op = encode_until(&Literal::pos("f"), "g", 0, 0, 2).unwrap();
        // f = [1,1,0], g = [0,0,1]: feasible.
        assert!(op.feasible(&[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]));
        // f = [1,0,0], g = [0,0,1]: row t=2 reads 1 <= 0.5.
        assert!(!op.feasible(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn eventually_always_small() {
        let ev = encode_eventually(&Literal::pos("f"), 0, 0, 0).unwrap();
        assert!(ev.feasible(&[1.0]));
        assert!(!ev.feasible(&[0.0]));
        let ev3 = encode_eventually(&Literal::pos("f"), 0, 0, 2).unwrap();
        assert!(ev3.feasible(&[0.0, 1.0, 0.0]));
        let al3 = encode_always(&Literal::pos("f"), 0, 0, 2).unwrap();
        assert!(al3.feasible(&[1.0, 1.0, 1.0]));
        assert!(!al3.feasible(&[1.0, 1.0, 0.0]));
    }

    #[test]
    fn exhaustive_equivalence_to_tau_4() {
        for check in operator_equivalence_suite(4, true) {
            assert_eq!(
                check.mismatches, 0,
                "{} tau={} had {} mismatches over {} assignments",
                check.operator, check.tau, check.mismatches, check.assignments
            );
        }
    }

    #[test]
    fn table_one_deltas() {
        let phi_a = parse_formula(
            "(and (eventually 12 12 G) (until 0 12 (not D1) K1) (until 0 12 (not D2) K2))",
        )
        .unwrap();
        let clauses = compile_cnf(&phi_a, 12).unwrap();
        assert_eq!(clauses.len(), 3);
        // eventually[[N]] binds only step N.
        assert_eq!(clauses[0].coords, vec![(12, "G".to_string())]);
        assert_eq!(
            clauses[0].complexity_delta(),
            Complexity {
                n_g: 1,
                n_b: 0,
                n_c: 1
            }
        );
        for c in &clauses[1..] {
            let tau = 13;
            assert_eq!(
                c.complexity_delta(),
                Complexity {
                    n_g: tau,
                    n_b: 0,
                    n_c: tau
                }
            );
            assert_eq!(c.complexity_delta(), c.kind.table_delta());
        }
    }

    #[test]
    fn five_eventuallys_compile_to_five_polytopes() {
        let phi_b = parse_formula(
            "(and (eventually 0 15 C1) (eventually 0 15 C2) (eventually 0 15 C3) \
              (eventually 0 15 C4) (eventually 0 15 C5))",
        )
        .unwrap();
        let clauses = compile_cnf(&phi_b, 15).unwrap();
        assert_eq!(clauses.len(), 5);
        for c in &clauses {
            assert_eq!(
                c.complexity_delta(),
                Complexity {
                    n_g: 1,
                    n_b: 0,
                    n_c: 1
                }
            );
        }
    }

    #[test]
    fn true_compiles_to_nothing() {
        let clauses = compile_cnf(&MtlFormula::True, 5).unwrap();
        assert!(clauses.is_empty());
    }

    #[test]
    fn unsupported_nesting_is_loud() {
        let f = parse_formula("(eventually 0 3 (and A B))").unwrap();
        let err = compile_cnf(&f, 5).unwrap_err();
        assert!(err.to_string().contains("(and A B)"), "{err}");
    }

    #[test]
    fn horizon_overrun_in_compile() {
        let f = parse_formula("(eventually 0 9 A)").unwrap();
        let err = compile_cnf(&f, 5).unwrap_err();
        assert!(err.to_string().contains("eventually"), "{err}");
    }

    #[test]
    fn literal_pair_and_survives_flattening() {
        let f = parse_formula("(and (and A B) (eventually 0 2 C))").unwrap();
        let clauses = compile_cnf(&f, 3).unwrap();
        assert_eq!(clauses.len(), 2);
        assert_eq!(clauses[0].kind, ClauseKind::And);
    }
}
