//! Seeded random-instance builders shared by the test suites.
//!
//! Instances are generated around feasible anchor points so random
//! constraint rows stay satisfiable, and geometry is kept away from
//! degenerate slivers so membership decisions at the default
//! tolerances are unambiguous.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::num::sparse::SpMat;
use crate::set::{ContainsSettings, FactorPoint, HPolytope, HybridZonotope};
use crate::solve::FactorProblem;

/// Random hybrid zonotope in `dim` dimensions with `n_b` binary
/// factors and a feasible anchor factor point (constraint rhs is
/// generated from the anchor).
pub fn random_hybrid_zonotope(
    rng: &mut ChaCha8Rng,
    dim: usize,
    n_g: usize,
    n_b: usize,
    n_c: usize,
) -> (HybridZonotope, FactorPoint) {
    let mut gc = Vec::new();
    for i in 0..dim {
        for j in 0..n_g {
            gc.push((i, j, rng.gen_range(-1.0..1.0)));
        }
    }
    let mut gb = Vec::new();
    for i in 0..dim {
        for j in 0..n_b {
            gb.push((i, j, rng.gen_range(-1.5..1.5)));
        }
    }
    let center = DVector::from_iterator(dim, (0..dim).map(|_| rng.gen_range(-1.0..1.0)));
    let anchor_cont = DVector::from_iterator(n_g, (0..n_g).map(|_| rng.gen_range(0.0..1.0)));
    let anchor_bin = DVector::from_iterator(
        n_b,
        (0..n_b).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }),
    );
    let mut ac = Vec::new();
    let mut ab = Vec::new();
    let mut b = DVector::zeros(n_c);
    for r in 0..n_c {
        for j in 0..n_g {
            if rng.gen_bool(0.6) {
                let v = rng.gen_range(-1.0..1.0);
                ac.push((r, j, v));
                b[r] += v * anchor_cont[j];
            }
        }
        for j in 0..n_b {
            if rng.gen_bool(0.4) {
                let v = rng.gen_range(-1.0..1.0);
                ab.push((r, j, v));
                b[r] += v * anchor_bin[j];
            }
        }
    }
    let z = HybridZonotope::new(
        SpMat::from_triplets(dim, n_g, &gc),
        SpMat::from_triplets(dim, n_b, &gb),
        center,
        SpMat::from_triplets(n_c, n_g, &ac),
        SpMat::from_triplets(n_c, n_b, &ab),
        b,
    )
    .expect("random set shapes are consistent");
    (z, FactorPoint::new(anchor_cont, anchor_bin))
}

/// Random H-rep polytope in `dim` dimensions containing `inside` with
/// a comfortable margin, optionally with one equality row through it.
pub fn random_hpoly_around(
    rng: &mut ChaCha8Rng,
    dim: usize,
    inside: &DVector<f64>,
    n_rows: usize,
    with_equality: bool,
) -> HPolytope {
    let mut tri = Vec::new();
    let mut rhs = DVector::zeros(n_rows);
    for r in 0..n_rows {
        let mut dot = 0.0;
        for j in 0..dim {
            let v = rng.gen_range(-1.0..1.0);
            tri.push((r, j, v));
            dot += v * inside[j];
        }
        rhs[r] = dot + rng.gen_range(0.3..1.5);
    }
    let ineq = SpMat::from_triplets(n_rows, dim, &tri);
    if with_equality {
        let mut etri = Vec::new();
        let mut dot = 0.0;
        for j in 0..dim {
            let v = rng.gen_range(-1.0..1.0);
            etri.push((0, j, v));
            dot += v * inside[j];
        }
        HPolytope::new(
            ineq,
            rhs,
            SpMat::from_triplets(1, dim, &etri),
            DVector::from_vec(vec![dot]),
        )
        .unwrap()
    } else {
        HPolytope::inequalities(ineq, rhs).unwrap()
    }
}

/// One generalized-intersection equivalence instance: a random set, a
/// random map, and a polytope positioned around the mapped anchor.
pub struct Prop1Instance {
    pub z: HybridZonotope,
    pub r: SpMat,
    pub h: HPolytope,
    pub anchor: FactorPoint,
}

pub fn prop1_instance(rng: &mut ChaCha8Rng) -> Prop1Instance {
    let dim = rng.gen_range(2..=3);
    let n_b = rng.gen_range(0..=4);
    let n_g = rng.gen_range(2..=4);
    let n_c = rng.gen_range(0..=1);
    let (z, anchor) = random_hybrid_zonotope(rng, dim, n_g, n_b, n_c);
    let h_dim = rng.gen_range(1..=2);
    let mut tri = Vec::new();
    for i in 0..h_dim {
        for j in 0..dim {
            tri.push((i, j, rng.gen_range(-1.0..1.0)));
        }
    }
    let r = SpMat::from_triplets(h_dim, dim, &tri);
    let mapped_anchor = r.matvec(&z.decode(&anchor));
    let rows = rng.gen_range(1..=3);
    let with_eq = rng.gen_bool(0.3);
    let h = random_hpoly_around(rng, h_dim, &mapped_anchor, rows, with_eq);
    Prop1Instance { z, r, h, anchor }
}

/// Compare membership in `z intersect_R h` against the two-sided
/// oracle (`x in z` and `R x in h`) on sampled points. Returns the
/// number of mismatches; sample points mix decoded factor samples with
/// interval-hull box samples.
pub fn check_prop1_equivalence(
    inst: &Prop1Instance,
    n_points: usize,
    rng: &mut ChaCha8Rng,
    tol: f64,
) -> usize {
    let inter = inst
        .z
        .generalized_intersection_hz(&inst.r, &inst.h)
        .expect("intersection dims");
    let settings = ContainsSettings {
        tol,
        ..Default::default()
    };
    let oracle_z = inst.z.containment_oracle(settings).unwrap();
    let oracle_i = inter.containment_oracle(settings).unwrap();
    let (hull_lo, hull_hi) = inst.z.interval_hull();
    let mut mismatches = 0;
    for t in 0..n_points {
        let x = if t % 2 == 0 {
            // Decoded (possibly constraint-violating) factor sample.
            let fp = FactorPoint::new(
                DVector::from_iterator(
                    inst.z.num_cont_gens(),
                    (0..inst.z.num_cont_gens()).map(|_| rng.gen_range(0.0..1.0)),
                ),
                DVector::from_iterator(
                    inst.z.num_bin_gens(),
                    (0..inst.z.num_bin_gens()).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }),
                ),
            );
            inst.z.decode(&fp)
        } else {
            DVector::from_iterator(inst.z.dim(), (0..inst.z.dim()).map(|i| {
                let hi = hull_hi[i].max(hull_lo[i] + 1e-9);
                rng.gen_range(hull_lo[i]..=hi)
            }))
        };
        let in_z = oracle_z.contains(&x).unwrap().holds();
        let rx = inst.r.matvec(&x);
        let in_h = inst.h.contains(&rx, tol);
        let both = in_z && in_h;
        let in_inter = oracle_i.contains(&x).unwrap().holds();
        if both != in_inter {
            mismatches += 1;
        }
    }
    mismatches
}

/// Random mixed-binary QP with a feasible anchor (or a deliberately
/// infeasible row when `force_infeasible`).
pub fn random_miqp(rng: &mut ChaCha8Rng, force_infeasible: bool) -> FactorProblem {
    let n_cont = rng.gen_range(2..=6);
    let n_bin = rng.gen_range(2..=5);
    let m = n_cont + n_bin;

    let mut p_triplets = Vec::new();
    for i in 0..m {
        p_triplets.push((i, i, rng.gen_range(0.2..2.0)));
    }
    let l_cols = 2;
    let l: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..l_cols).map(|_| rng.gen_range(-0.6..0.6)).collect())
        .collect();
    for i in 0..m {
        for j in 0..m {
            let v: f64 = (0..l_cols).map(|k| l[i][k] * l[j][k]).sum();
            if v != 0.0 {
                p_triplets.push((i, j, v));
            }
        }
    }
    let p = SpMat::from_triplets(m, m, &p_triplets);
    let q = DVector::from_iterator(m, (0..m).map(|_| rng.gen_range(-1.0..1.0)));

    let mut anchor = DVector::zeros(m);
    for i in 0..n_cont {
        anchor[i] = rng.gen_range(0.0..1.0);
    }
    for j in n_cont..m {
        anchor[j] = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
    }
    let mut a_triplets = Vec::new();
    let mut b = Vec::new();
    if rng.gen_bool(0.7) && n_bin >= 2 {
        let size = rng.gen_range(2..=n_bin);
        for c in 0..size {
            a_triplets.push((0, n_cont + c, 1.0));
            anchor[n_cont + c] = 0.0;
        }
        let active = n_cont + rng.gen_range(0..size);
        anchor[active] = 1.0;
        b.push(1.0);
    }
    for _ in 0..rng.gen_range(0..3) {
        let row = b.len();
        let mut rhs = 0.0;
        for _ in 0..rng.gen_range(2..=4) {
            let col = rng.gen_range(0..m);
            let v = rng.gen_range(-1.0..1.0);
            a_triplets.push((row, col, v));
            rhs += v * anchor[col];
        }
        b.push(rhs);
    }
    if force_infeasible {
        let row = b.len();
        a_triplets.push((row, 0, 1.0));
        a_triplets.push((row, 1, 1.0));
        b.push(3.5);
    }
    FactorProblem {
        p,
        q,
        a: SpMat::from_triplets(b.len(), m, &a_triplets),
        b: DVector::from_vec(b),
        obj_const: 0.0,
        n_cont,
        n_bin,
    }
}
