//! Set-level properties: operation/decoding commutation, the
//! generalized-intersection equivalence against the two-sided oracle,
//! and union membership.

use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zonoplan::set::{
    union_of_constrained_zonotopes, ConstrainedZonotope, ContainsSettings, FactorPoint,
    HybridZonotope, Zonotope,
};
use zonoplan::testkit::{check_prop1_equivalence, prop1_instance, random_hybrid_zonotope};
use zonoplan::SpMat;

fn random_factors(rng: &mut ChaCha8Rng, z: &HybridZonotope) -> FactorPoint {
    FactorPoint::new(
        DVector::from_iterator(
            z.num_cont_gens(),
            (0..z.num_cont_gens()).map(|_| rng.gen_range(0.0..1.0)),
        ),
        DVector::from_iterator(
            z.num_bin_gens(),
            (0..z.num_bin_gens()).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }),
        ),
    )
}

#[test]
fn operations_commute_with_decoding() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..20 {
        let (z1, _) = random_hybrid_zonotope(&mut rng, 3, 4, 2, 1);
        let (z2, _) = random_hybrid_zonotope(&mut rng, 3, 3, 1, 0);

        // Affine map.
        let mut tri = Vec::new();
        for i in 0..2 {
            for j in 0..3 {
                tri.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
        let r = SpMat::from_triplets(2, 3, &tri);
        let t = DVector::from_vec(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let mapped = z1.affine_map(&r, &t).unwrap();
        let sum = z1.minkowski_sum(&z2).unwrap();
        let prod = z1.cartesian_product(&z2);

        for _ in 0..5 {
            let f1 = random_factors(&mut rng, &z1);
            let f2 = random_factors(&mut rng, &z2);
            let x1 = z1.decode(&f1);
            let x2 = z2.decode(&f2);

            // R x + t on decoded points equals decoding the mapped set.
            let want = r.matvec(&x1) + &t;
            let got = mapped.decode(&f1);
            assert!((want - got).amax() < 1e-12);

            // Sum factors stack: [f1; f2] decodes to x1 + x2.
            let fsum = FactorPoint::new(
                DVector::from_iterator(
                    f1.cont.len() + f2.cont.len(),
                    f1.cont.iter().chain(f2.cont.iter()).copied(),
                ),
                DVector::from_iterator(
                    f1.bin.len() + f2.bin.len(),
                    f1.bin.iter().chain(f2.bin.iter()).copied(),
                ),
            );
            assert!((sum.decode(&fsum) - (&x1 + &x2)).amax() < 1e-12);

            // Product factors stack to the stacked point.
            let got = prod.decode(&fsum);
            for i in 0..3 {
                assert!((got[i] - x1[i]).abs() < 1e-12);
                assert!((got[3 + i] - x2[i]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn generalized_intersection_matches_two_sided_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xabcd);
    for trial in 0..12 {
        let inst = prop1_instance(&mut rng);
        let mismatches = check_prop1_equivalence(&inst, 120, &mut rng, 1e-6);
        assert_eq!(mismatches, 0, "trial {trial} had {mismatches} mismatches");
    }
}

#[test]
fn union_membership_iff_some_part() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // Three overlapping boxes on a line segment.
    let parts_geom = [(-1.0, 0.2), (0.0, 1.0), (0.8, 2.0)];
    let parts: Vec<ConstrainedZonotope> = parts_geom
        .iter()
        .map(|&(lo, hi)| Zonotope::from_box(&[lo], &[hi]).into())
        .collect();
    let u = union_of_constrained_zonotopes(&parts).unwrap();
    let oracle = u.containment_oracle(ContainsSettings::default()).unwrap();
    for _ in 0..200 {
        let x = rng.gen_range(-1.5..2.5);
        let want = parts_geom.iter().any(|&(lo, hi)| lo <= x && x <= hi);
        // Stay off the measure-zero boundaries.
        if parts_geom
            .iter()
            .any(|&(lo, hi)| (x - lo).abs() < 1e-4 || (x - hi).abs() < 1e-4)
        {
            continue;
        }
        let got = oracle
            .contains(&DVector::from_vec(vec![x]))
            .unwrap()
            .holds();
        assert_eq!(got, want, "x = {x}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Interval hull soundness: decoded factor points stay inside the
    /// hull of any constraint-free set.
    #[test]
    fn hull_contains_decoded_points(
        seed in 0u64..1_000,
        lo0 in -2.0f64..0.0,
        w0 in 0.1f64..3.0,
        lo1 in -2.0f64..0.0,
        w1 in 0.1f64..3.0,
    ) {
        let z = HybridZonotope::from_box(&[lo0, lo1], &[lo0 + w0, lo1 + w1]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (hl, hh) = z.interval_hull();
        for _ in 0..20 {
            let fp = random_factors(&mut rng, &z);
            let x = z.decode(&fp);
            for i in 0..2 {
                prop_assert!(x[i] >= hl[i] - 1e-12 && x[i] <= hh[i] + 1e-12);
            }
        }
    }

    /// Complexity accounting is exact for every operation.
    #[test]
    fn complexity_deltas_are_exact(
        seed in 0u64..1_000,
        n_i in 0usize..4,
        n_e in 0usize..3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (z1, _) = random_hybrid_zonotope(&mut rng, 2, 3, 2, 1);
        let (z2, _) = random_hybrid_zonotope(&mut rng, 2, 2, 1, 2);
        let c1 = z1.complexity();
        let c2 = z2.complexity();

        let prod = z1.cartesian_product(&z2);
        prop_assert_eq!(prod.complexity(), c1 + c2);

        let sum = z1.minkowski_sum(&z2).unwrap();
        prop_assert_eq!(sum.complexity(), c1 + c2);

        let mapped = z1.affine_map(&SpMat::identity(2), &DVector::zeros(2)).unwrap();
        prop_assert_eq!(mapped.complexity(), c1);

        let anchor = z1.decode(&FactorPoint::new(
            DVector::from_element(3, 0.5),
            DVector::zeros(2),
        ));
        let h = zonoplan::testkit::random_hpoly_around(&mut rng, 2, &anchor, n_i, n_e > 0);
        let inter = z1.generalized_intersection_hz(&SpMat::identity(2), &h).unwrap();
        let after = inter.complexity();
        prop_assert_eq!(after.n_g - c1.n_g, n_i);
        prop_assert_eq!(after.n_b, c1.n_b);
        prop_assert_eq!(after.n_c - c1.n_c, n_i + usize::from(n_e > 0));
    }
}
