//! Branch-and-bound vs brute-force enumeration on randomized
//! mixed-binary QPs, plus bound-validity and determinism checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zonoplan::solve::{solve_factor_bnb, solve_factor_bruteforce, BnbOptions, SolveStatus};
use zonoplan::testkit::random_miqp;

#[test]
fn bnb_matches_bruteforce_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let opts = BnbOptions {
        gap: 1e-7,
        node_budget: 100_000,
        ..Default::default()
    };
    for trial in 0..30 {
        let prob = random_miqp(&mut rng, false);
        let bnb = solve_factor_bnb(&prob, &opts).unwrap();
        let brute = solve_factor_bruteforce(&prob, 20).unwrap();
        assert_eq!(
            bnb.status,
            SolveStatus::OptimalAtGap,
            "trial {trial}: bnb status {:?}",
            bnb.status
        );
        assert_eq!(brute.status, SolveStatus::OptimalAtGap, "trial {trial}");
        let tol = 1e-6 * brute.objective.abs().max(1.0);
        assert!(
            (bnb.objective - brute.objective).abs() <= tol,
            "trial {trial}: bnb {} vs brute {}",
            bnb.objective,
            brute.objective
        );
        // Bound validity against the exact optimum.
        assert!(
            bnb.bound <= brute.objective + 1e-9,
            "trial {trial}: bound {} above optimum {}",
            bnb.bound,
            brute.objective
        );
    }
}

#[test]
fn infeasibility_verdicts_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    for trial in 0..10 {
        let prob = random_miqp(&mut rng, true);
        let bnb = solve_factor_bnb(&prob, &BnbOptions::default()).unwrap();
        let brute = solve_factor_bruteforce(&prob, 20).unwrap();
        assert_eq!(bnb.status, SolveStatus::Infeasible, "trial {trial}");
        assert_eq!(brute.status, SolveStatus::Infeasible, "trial {trial}");
    }
}

#[test]
fn repeated_solves_are_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let prob = random_miqp(&mut rng, false);
    let opts = BnbOptions::default();
    let a = solve_factor_bnb(&prob, &opts).unwrap();
    let b = solve_factor_bnb(&prob, &opts).unwrap();
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.bound.to_bits(), b.bound.to_bits());
    assert_eq!(a.nodes, b.nodes);
    let fa = a.incumbent.unwrap();
    let fb = b.incumbent.unwrap();
    assert_eq!(fa.bin, fb.bin);
    for (x, y) in fa.cont.iter().zip(fb.cont.iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn relaxation_bounds_monotone_down_the_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    for _ in 0..10 {
        let prob = random_miqp(&mut rng, false);
        let report = solve_factor_bnb(
            &prob,
            &BnbOptions {
                gap: 1e-9,
                ..Default::default()
            },
        )
        .unwrap();
        let by_id: std::collections::HashMap<usize, f64> = report
            .log
            .iter()
            .map(|l| (l.node, l.bound))
            .collect();
        for l in &report.log {
            if let (Some(pid), true) = (l.parent, l.bound.is_finite()) {
                if let Some(pb) = by_id.get(&pid) {
                    if pb.is_finite() {
                        assert!(l.bound >= pb - 1e-9, "child {} vs parent {}", l.bound, pb);
                    }
                }
            }
        }
    }
}
