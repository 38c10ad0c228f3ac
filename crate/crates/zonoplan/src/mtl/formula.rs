//! MTL formulas over region propositions and their exact semantics on
//! finite 0/1 traces.
//!
//! The until operator follows the timed variant in which the first
//! operand only needs to hold from `t1` on (not from the evaluation
//! step `k`); the conventional operator is recovered by
//! [`conventional_until`].

use crate::mtl::{MtlError, MtlResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MtlFormula {
    True,
    Prop(String),
    Not(Box<MtlFormula>),
    And(Box<MtlFormula>, Box<MtlFormula>),
    Or(Box<MtlFormula>, Box<MtlFormula>),
    /// `Until(f, g, t1, t2)`: g becomes true at some `t` in
    /// `[[k+t1, k+t2]]` and f holds on `[[k+t1, t))`.
    Until(Box<MtlFormula>, Box<MtlFormula>, usize, usize),
    Eventually(Box<MtlFormula>, usize, usize),
    Always(Box<MtlFormula>, usize, usize),
}

impl MtlFormula {
    pub fn prop(id: impl Into<String>) -> Self {
        MtlFormula::Prop(id.into())
    }

    pub fn not(f: MtlFormula) -> Self {
        MtlFormula::Not(Box::new(f))
    }

    pub fn and(f: MtlFormula, g: MtlFormula) -> Self {
        MtlFormula::And(Box::new(f), Box::new(g))
    }

    pub fn or(f: MtlFormula, g: MtlFormula) -> Self {
        MtlFormula::Or(Box::new(f), Box::new(g))
    }

    pub fn until(f: MtlFormula, g: MtlFormula, t1: usize, t2: usize) -> MtlResult<Self> {
        if t1 > t2 {
            return Err(MtlError::BadInterval { t1, t2 });
        }
        Ok(MtlFormula::Until(Box::new(f), Box::new(g), t1, t2))
    }

    pub fn eventually(f: MtlFormula, t1: usize, t2: usize) -> MtlResult<Self> {
        if t1 > t2 {
            return Err(MtlError::BadInterval { t1, t2 });
        }
        Ok(MtlFormula::Eventually(Box::new(f), t1, t2))
    }

    pub fn always(f: MtlFormula, t1: usize, t2: usize) -> MtlResult<Self> {
        if t1 > t2 {
            return Err(MtlError::BadInterval { t1, t2 });
        }
        Ok(MtlFormula::Always(Box::new(f), t1, t2))
    }

    /// Conjunction of a clause list (`True` for an empty list).
    pub fn conjunction(mut clauses: Vec<MtlFormula>) -> MtlFormula {
        match clauses.len() {
            0 => MtlFormula::True,
            1 => clauses.pop().unwrap(),
            _ => {
                let mut it = clauses.into_iter();
                let first = it.next().unwrap();
                it.fold(first, MtlFormula::and)
            }
        }
    }
}

impl std::fmt::Display for MtlFormula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MtlFormula::True => write!(f, "true"),
            MtlFormula::Prop(p) => write!(f, "{p}"),
            MtlFormula::Not(g) => write!(f, "(not {g})"),
            MtlFormula::And(a, b) => write!(f, "(and {a} {b})"),
            MtlFormula::Or(a, b) => write!(f, "(or {a} {b})"),
            MtlFormula::Until(a, b, t1, t2) => write!(f, "(until {t1} {t2} {a} {b})"),
            MtlFormula::Eventually(a, t1, t2) => write!(f, "(eventually {t1} {t2} {a})"),
            MtlFormula::Always(a, t1, t2) => write!(f, "(always {t1} {t2} {a})"),
        }
    }
}

/// Largest time offset the formula can reach relative to its
/// evaluation step.
pub fn time_bound(f: &MtlFormula) -> usize {
    match f {
        MtlFormula::True | MtlFormula::Prop(_) => 0,
        MtlFormula::Not(g) => time_bound(g),
        MtlFormula::And(a, b) | MtlFormula::Or(a, b) => time_bound(a).max(time_bound(b)),
        MtlFormula::Until(a, b, _, t2) => t2 + time_bound(a).max(time_bound(b)),
        MtlFormula::Eventually(a, _, t2) | MtlFormula::Always(a, _, t2) => t2 + time_bound(a),
    }
}

/// Ordered proposition table; column order of [`PropTrace`].
#[derive(Debug, Clone, Default)]
pub struct PropSet {
    ids: Vec<String>,
}

impl PropSet {
    pub fn new(ids: Vec<String>) -> Self {
        Self { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|p| p == id)
    }
}

/// 0/1 indicator matrix, one row per time step, one column per
/// proposition. Rows are one-hot when generated from a disjoint map;
/// traces built from raw state membership may have any number of true
/// entries per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropTrace {
    n_steps: usize,
    n_props: usize,
    bits: Vec<bool>,
}

impl PropTrace {
    pub fn new(n_steps: usize, n_props: usize) -> Self {
        Self {
            n_steps,
            n_props,
            bits: vec![false; n_steps * n_props],
        }
    }

    /// Number of time points (horizon N gives N+1 steps).
    pub fn steps(&self) -> usize {
        self.n_steps
    }

    pub fn props(&self) -> usize {
        self.n_props
    }

    pub fn get(&self, k: usize, p: usize) -> bool {
        self.bits[k * self.n_props + p]
    }

    pub fn set(&mut self, k: usize, p: usize, v: bool) {
        self.bits[k * self.n_props + p] = v;
    }

    /// Build from per-step rows of column indices that are true.
    pub fn from_true_sets(n_steps: usize, n_props: usize, rows: &[Vec<usize>]) -> Self {
        let mut t = Self::new(n_steps, n_props);
        for (k, row) in rows.iter().enumerate() {
            for &p in row {
                t.set(k, p, true);
            }
        }
        t
    }
}

fn horizon_check(f: &MtlFormula, k: usize, horizon: usize) -> MtlResult<()> {
    match f {
        MtlFormula::True => Ok(()),
        MtlFormula::Prop(_) => {
            if k > horizon {
                Err(MtlError::HorizonOverrun {
                    op: "prop",
                    t1: 0,
                    t2: 0,
                    k,
                    needed: k,
                    horizon,
                })
            } else {
                Ok(())
            }
        }
        MtlFormula::Not(g) => horizon_check(g, k, horizon),
        MtlFormula::And(a, b) | MtlFormula::Or(a, b) => {
            horizon_check(a, k, horizon)?;
            horizon_check(b, k, horizon)
        }
        MtlFormula::Until(a, b, t1, t2) => {
            let needed = k + t2 + time_bound(a).max(time_bound(b));
            if needed > horizon {
                return Err(MtlError::HorizonOverrun {
                    op: "until",
                    t1: *t1,
                    t2: *t2,
                    k,
                    needed,
                    horizon,
                });
            }
            Ok(())
        }
        MtlFormula::Eventually(a, t1, t2) => {
            let needed = k + t2 + time_bound(a);
            if needed > horizon {
                return Err(MtlError::HorizonOverrun {
                    op: "eventually",
                    t1: *t1,
                    t2: *t2,
                    k,
                    needed,
                    horizon,
                });
            }
            Ok(())
        }
        MtlFormula::Always(a, t1, t2) => {
            let needed = k + t2 + time_bound(a);
            if needed > horizon {
                return Err(MtlError::HorizonOverrun {
                    op: "always",
                    t1: *t1,
                    t2: *t2,
                    k,
                    needed,
                    horizon,
                });
            }
            Ok(())
        }
    }
}

/// Exact recursive MTL semantics on a finite trace. Errors if the
/// formula reaches past the trace horizon or names an unknown
/// proposition.
pub fn evaluate(f: &MtlFormula, trace: &PropTrace, k: usize, props: &PropSet) -> MtlResult<bool> {
    horizon_check(f, k, trace.steps() - 1)?;
    eval_unchecked(f, trace, k, props)
}

fn eval_unchecked(
    f: &MtlFormula,
    trace: &PropTrace,
    k: usize,
    props: &PropSet,
) -> MtlResult<bool> {
    Ok(match f {
        MtlFormula::True => true,
        MtlFormula::Prop(p) => {
            let idx = props
                .index_of(p)
                .ok_or_else(|| MtlError::UnknownProp(p.clone()))?;
            trace.get(k, idx)
        }
        MtlFormula::Not(g) => !eval_unchecked(g, trace, k, props)?,
        MtlFormula::And(a, b) => {
            eval_unchecked(a, trace, k, props)? && eval_unchecked(b, trace, k, props)?
        }
        MtlFormula::Or(a, b) => {
            eval_unchecked(a, trace, k, props)? || eval_unchecked(b, trace, k, props)?
        }
        MtlFormula::Until(a, b, t1, t2) => {
            let mut holds = false;
            'outer: for t in (k + t1)..=(k + t2) {
                if eval_unchecked(b, trace, t, props)? {
                    for tp in (k + t1)..t {
                        if !eval_unchecked(a, trace, tp, props)? {
                            continue 'outer;
                        }
                    }
                    holds = true;
                    break;
                }
            }
            holds
        }
        MtlFormula::Eventually(a, t1, t2) => {
            let mut holds = false;
            for t in (k + t1)..=(k + t2) {
                if eval_unchecked(a, trace, t, props)? {
                    holds = true;
                    break;
                }
            }
            holds
        }
        MtlFormula::Always(a, t1, t2) => {
            let mut holds = true;
            for t in (k + t1)..=(k + t2) {
                if !eval_unchecked(a, trace, t, props)? {
                    holds = false;
                    break;
                }
            }
            holds
        }
    })
}

/// The conventional until operator, in which the first operand must
/// hold from the evaluation step onward:
/// `(always[[0,t1-1]] f) and (f until[[t1,t2]] g)`.
/// For `t1 = 0` the prefix is empty and the timed until is returned
/// unchanged.
pub fn conventional_until(
    f: MtlFormula,
    g: MtlFormula,
    t1: usize,
    t2: usize,
) -> MtlResult<MtlFormula> {
    if t1 > t2 {
        return Err(MtlError::BadInterval { t1, t2 });
    }
    if t1 == 0 {
        return MtlFormula::until(f, g, 0, t2);
    }
    let prefix = MtlFormula::always(f.clone(), 0, t1 - 1)?;
    let until = MtlFormula::until(f, g, t1, t2)?;
    Ok(MtlFormula::and(prefix, until))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn props2() -> PropSet {
        PropSet::new(vec!["p".into(), "q".into()])
    }

    fn trace_from_cols(p_col: &[u8], q_col: &[u8]) -> PropTrace {
        let mut t = PropTrace::new(p_col.len(), 2);
        for k in 0..p_col.len() {
            t.set(k, 0, p_col[k] == 1);
            t.set(k, 1, q_col[k] == 1);
        }
        t
    }

    #[test]
    fn eventually_and_always_basics() {
        let props = props2();
        let tr = trace_from_cols(&[0, 1, 0], &[0, 0, 0]);
        let f = MtlFormula::eventually(MtlFormula::prop("p"), 0, 2).unwrap();
        assert!(evaluate(&f, &tr, 0, &props).unwrap());

        let tr = trace_from_cols(&[1, 0, 1], &[0, 0, 0]);
        let f = MtlFormula::always(MtlFormula::prop("p"), 0, 2).unwrap();
        assert!(!evaluate(&f, &tr, 0, &props).unwrap());
    }

    #[test]
    fn until_requires_prefix_from_t1() {
        let props = props2();
        // p = [1,0,0], q = [0,0,1]: q first true at 2 but p fails at 1.
        let tr = trace_from_cols(&[1, 0, 0], &[0, 0, 1]);
        let f = MtlFormula::until(MtlFormula::prop("p"), MtlFormula::prop("q"), 0, 2).unwrap();
        assert!(!evaluate(&f, &tr, 0, &props).unwrap());
        // p = [1,1,0] is enough: p holds on [0,2).
        let tr = trace_from_cols(&[1, 1, 0], &[0, 0, 1]);
        assert!(evaluate(&f, &tr, 0, &props).unwrap());
        // The paper variant: p need not hold before t1.
        let tr = trace_from_cols(&[0, 1, 0], &[0, 0, 1]);
        let f = MtlFormula::until(MtlFormula::prop("p"), MtlFormula::prop("q"), 1, 2).unwrap();
        assert!(evaluate(&f, &tr, 0, &props).unwrap());
    }

    #[test]
    fn horizon_overrun_names_operator() {
        let props = props2();
        let tr = trace_from_cols(&[1, 1], &[1, 1]);
        let f = MtlFormula::eventually(MtlFormula::prop("p"), 0, 5).unwrap();
        let err = evaluate(&f, &tr, 0, &props).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("eventually") && msg.contains("5"), "{msg}");
    }

    #[test]
    fn conventional_until_degenerate_prefix() {
        let f = MtlFormula::prop("p");
        let g = MtlFormula::prop("q");
        let cu = conventional_until(f.clone(), g.clone(), 0, 3).unwrap();
        assert_eq!(cu, MtlFormula::until(f, g, 0, 3).unwrap());
    }

    #[test]
    fn conventional_until_structure() {
        let f = MtlFormula::prop("p");
        let g = MtlFormula::prop("q");
        let cu = conventional_until(f.clone(), g.clone(), 2, 3).unwrap();
        let expected = MtlFormula::and(
            MtlFormula::always(f.clone(), 0, 1).unwrap(),
            MtlFormula::until(f, g, 2, 3).unwrap(),
        );
        assert_eq!(cu, expected);
    }

    #[test]
    fn conventional_until_exhaustive_cross_check() {
        // All 2^8 two-proposition traces of length 4, all intervals.
        let props = props2();
        for bits in 0..256u32 {
            let p: Vec<u8> = (0..4).map(|i| ((bits >> i) & 1) as u8).collect();
            let q: Vec<u8> = (0..4).map(|i| ((bits >> (4 + i)) & 1) as u8).collect();
            let tr = trace_from_cols(&p, &q);
            for t1 in 0..4 {
                for t2 in t1..4 {
                    let cu = conventional_until(
                        MtlFormula::prop("p"),
                        MtlFormula::prop("q"),
                        t1,
                        t2,
                    )
                    .unwrap();
                    let got = evaluate(&cu, &tr, 0, &props).unwrap();
                    // Direct conventional definition: exists t in
                    // [t1,t2] with q at t and p on [0, t).
                    let mut want = false;
                    'outer: for t in t1..=t2 {
                        if q[t] == 1 {
                            for tp in 0..t {
                                if p[tp] == 0 {
                                    continue 'outer;
                                }
                            }
                            want = true;
                            break;
                        }
                    }
                    assert_eq!(got, want, "bits={bits} t1={t1} t2={t2}");
                }
            }
        }
    }

    #[test]
    fn derived_operator_identities() {
        // eventually == true until, always == not eventually not,
        // on all traces of length <= 6 with <= 2 propositions.
        let props = props2();
        for len in 1..=6usize {
            for bits in 0..(1u32 << (2 * len)) {
                let p: Vec<u8> = (0..len).map(|i| ((bits >> i) & 1) as u8).collect();
                let q: Vec<u8> = (0..len).map(|i| ((bits >> (len + i)) & 1) as u8).collect();
                let tr = trace_from_cols(&p, &q);
                for t1 in 0..len {
                    for t2 in t1..len {
                        let ev = MtlFormula::eventually(MtlFormula::prop("p"), t1, t2).unwrap();
                        let tu = MtlFormula::until(
                            MtlFormula::True,
                            MtlFormula::prop("p"),
                            t1,
                            t2,
                        )
                        .unwrap();
                        assert_eq!(
                            evaluate(&ev, &tr, 0, &props).unwrap(),
                            evaluate(&tu, &tr, 0, &props).unwrap()
                        );
                        let al = MtlFormula::always(MtlFormula::prop("q"), t1, t2).unwrap();
                        let ne = MtlFormula::not(
                            MtlFormula::eventually(
                                MtlFormula::not(MtlFormula::prop("q")),
                                t1,
                                t2,
                            )
                            .unwrap(),
                        );
                        assert_eq!(
                            evaluate(&al, &tr, 0, &props).unwrap(),
                            evaluate(&ne, &tr, 0, &props).unwrap()
                        );
                    }
                }
            }
        }
    }
}
