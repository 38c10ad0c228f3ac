//! Lifted reachability soundness: simulated trajectories are contained
//! with exact per-step dynamics, complexity totals hold as integer
//! identities, and time-varying schedules use each step's own map.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zonoplan::reach::system::double_integrator;
use zonoplan::reach::{
    apply_mtl, build_lifted, build_map, LtiSystem, MapSchedule, MapValidation, PartitionKind,
    RegionRole, RegionSpec,
};
use zonoplan::set::{ContainsSettings, HPolytope, HybridZonotope};

const WS_LO: [f64; 4] = [0.0, 0.0, -1.0, -1.0];
const WS_HI: [f64; 4] = [6.0, 4.0, 1.0, 1.0];

fn box_region(id: &str, role: RegionRole, lo2: [f64; 2], hi2: [f64; 2]) -> RegionSpec {
    RegionSpec {
        id: id.into(),
        polytope: HPolytope::from_box(
            &[lo2[0], lo2[1], WS_LO[2], WS_LO[3]],
            &[hi2[0], hi2[1], WS_HI[2], WS_HI[3]],
        ),
        disturbance: DVector::zeros(4),
        role,
    }
}

fn validation() -> MapValidation {
    MapValidation {
        workspace_lo: WS_LO.to_vec(),
        workspace_hi: WS_HI.to_vec(),
        coverage_dims: vec![0, 1],
        coverage_resolution: 0.5,
        keepouts: vec![],
    }
}

/// Three-strip partition of the workspace.
fn three_region_schedule() -> MapSchedule {
    let regions = vec![
        box_region("L", RegionRole::Free, [0.0, 0.0], [2.0, 4.0]),
        box_region("M", RegionRole::Free, [2.0, 0.0], [4.0, 4.0]),
        box_region("G", RegionRole::Goal, [4.0, 0.0], [6.0, 4.0]),
    ];
    MapSchedule::fixed(build_map(regions, PartitionKind::Dcp, &validation()).unwrap())
}

fn system(schedule: &MapSchedule, x0: &[f64]) -> LtiSystem {
    let (a, b, _) = double_integrator(schedule.num_regions());
    let w = schedule.at(0).disturbance_matrix();
    LtiSystem::new(
        a,
        b,
        w,
        DVector::from_column_slice(x0),
        vec![HybridZonotope::from_box(&[-0.4, -0.4], &[0.4, 0.4])],
    )
    .unwrap()
}

/// Simulate with inputs clamped so the state stays inside the
/// workspace (the plan stays representable in the map).
fn simulate(
    sys: &LtiSystem,
    schedule: &MapSchedule,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>, Vec<DVector<f64>>) {
    'outer: loop {
        let mut states = vec![sys.x0.clone()];
        let mut bins = Vec::new();
        let mut inputs = Vec::new();
        for k in 0..=n {
            let map = schedule.at(k);
            let containing = map.regions_containing(&states[k], 1e-9);
            if containing.is_empty() {
                continue 'outer;
            }
            let mut delta = DVector::zeros(map.num_regions());
            delta[containing[0]] = 1.0;
            bins.push(delta);
            if k < n {
                let u = DVector::from_vec(vec![
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-0.4..0.4),
                ]);
                let next = sys.step(&states[k], &u, &bins[k]);
                inputs.push(u);
                states.push(next);
            }
        }
        // Reject runs that leave the workspace.
        for x in &states {
            for i in 0..4 {
                if x[i] < WS_LO[i] - 1e-12 || x[i] > WS_HI[i] + 1e-12 {
                    continue 'outer;
                }
            }
        }
        return (states, bins, inputs);
    }
}

#[test]
fn simulated_trajectories_are_contained_with_tight_dynamics() {
    let schedule = three_region_schedule();
    let sys = system(&schedule, &[1.0, 2.0, 0.0, 0.0]);
    let n = 4;
    let lifted = build_lifted(&sys, &schedule, n, &[]).unwrap();
    assert_eq!(
        lifted.set.complexity(),
        lifted.breakdown.expected_total(),
        "complexity identity"
    );
    let oracle = lifted
        .set
        .containment_oracle(ContainsSettings::default())
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..6 {
        let (states, bins, inputs) = simulate(&sys, &schedule, n, &mut rng);
        let z = lifted.index.stack(&states, &bins, &inputs);
        let out = oracle.contains(&z).unwrap();
        assert!(out.holds(), "trial {trial} trajectory not contained");
        // The witness decodes to a trajectory with tight dynamics.
        let fp = out.witness().unwrap();
        let zd = lifted.set.decode(fp);
        let (ds, db, du) = lifted.index.unstack(&zd);
        for k in 0..n {
            let r = sys.residual(&ds[k], &du[k], &db[k], &ds[k + 1]);
            assert!(r <= 1e-9, "trial {trial} step {k} residual {r:.2e}");
        }
    }
}

#[test]
fn dynamics_violations_are_rejected() {
    let schedule = three_region_schedule();
    let sys = system(&schedule, &[1.0, 2.0, 0.0, 0.0]);
    let lifted = build_lifted(&sys, &schedule, 3, &[]).unwrap();
    let oracle = lifted
        .set
        .containment_oracle(ContainsSettings::default())
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let (states, bins, inputs) = simulate(&sys, &schedule, 3, &mut rng);
    let mut z = lifted.index.stack(&states, &bins, &inputs);
    z[lifted.index.state(2, 1)] += 0.01;
    assert!(!oracle.contains(&z).unwrap().holds());
}

#[test]
fn mtl_intersection_preserves_satisfying_runs_only() {
    let schedule = three_region_schedule();
    let sys = system(&schedule, &[1.2, 2.0, 0.45, 0.0]);
    let n = 3;
    let lifted = build_lifted(&sys, &schedule, n, &[]).unwrap();
    // Require the left strip at every step.
    let formula = zonoplan::mtl::parse_formula("(always 0 3 L)").unwrap();
    let clauses = zonoplan::mtl::compile_cnf(&formula, n).unwrap();
    let carved = apply_mtl(&lifted, &clauses).unwrap();
    let oracle = carved
        .set
        .containment_oracle(ContainsSettings::default())
        .unwrap();

    // Standing still keeps the run in L forever.
    let run = |inputs: Vec<DVector<f64>>| {
        let mut states = vec![sys.x0.clone()];
        let mut bins = Vec::new();
        for k in 0..=n {
            let map = schedule.at(k);
            let containing = map.regions_containing(&states[k], 1e-9);
            let mut d = DVector::zeros(map.num_regions());
            d[containing[0]] = 1.0;
            bins.push(d);
            if k < n {
                let next = sys.step(&states[k], &inputs[k], &bins[k]);
                states.push(next);
            }
        }
        (states, bins, inputs)
    };
    // Braking keeps the run inside L at every step.
    let (states, bins, inputs) = run(vec![
        DVector::from_vec(vec![-0.4, 0.0]),
        DVector::from_vec(vec![-0.05, 0.0]),
        DVector::zeros(2),
    ]);
    assert!(states.iter().all(|x| x[0] < 2.0));
    let z = lifted.index.stack(&states, &bins, &inputs);
    assert!(
        oracle.contains(&z).unwrap().holds(),
        "satisfying run must survive the intersection"
    );

    // Accelerating right crosses into M by step 2.
    let (states, bins, inputs) = run(vec![
        DVector::from_vec(vec![0.3, 0.0]),
        DVector::from_vec(vec![0.2, 0.0]),
        DVector::from_vec(vec![-0.2, 0.0]),
    ]);
    assert!(states.iter().any(|x| x[0] > 2.0 + 1e-6));
    let z = lifted.index.stack(&states, &bins, &inputs);
    assert!(
        !oracle.contains(&z).unwrap().holds(),
        "violating run must be carved away"
    );
}

#[test]
fn time_varying_schedule_uses_step_maps() {
    // A sentinel box marches right one cell per step; the rest is
    // background. A trajectory is representable with the sentinel
    // label at step k only if maps[k] has the box at the right spot.
    let n = 3;
    let mut maps = Vec::new();
    for k in 0..=n {
        let x0 = k as f64;
        let regions = vec![
            box_region("sentinel", RegionRole::Goal, [x0, 0.0], [x0 + 1.0, 4.0]),
            box_region("bg", RegionRole::Free, [0.0, 0.0], [6.0, 4.0]),
        ];
        maps.push(build_map(regions, PartitionKind::Ncp, &validation()).unwrap());
    }
    let schedule = MapSchedule::time_varying(maps).unwrap();
    // Geometry audit per step.
    for k in 0..=n {
        let hull = schedule.at(k).regions[0]
            .polytope
            .interval_hull_lp()
            .unwrap();
        assert!((hull.0[0] - k as f64).abs() < 1e-9, "step {k} sentinel lo");
    }

    let sys = system(&schedule, &[0.5, 2.0, 0.0, 0.0]);
    let lifted = build_lifted(&sys, &schedule, n, &[]).unwrap();
    let oracle = lifted
        .set
        .containment_oracle(ContainsSettings::default())
        .unwrap();

    // Ride along with the sentinel: x = 0.5 + k is inside it at every
    // step (velocity 1 exceeds the input box, so keep velocity at the
    // workspace cap by starting at full speed).
    let mut states = vec![DVector::from_vec(vec![0.5, 2.0, 1.0, 0.0])];
    let mut bins = Vec::new();
    let mut inputs = Vec::new();
    let sys = system(&schedule, &[0.5, 2.0, 1.0, 0.0]);
    for k in 0..=n {
        let mut d = DVector::zeros(2);
        d[0] = 1.0; // sentinel label
        bins.push(d);
        if k < n {
            let u = DVector::zeros(2);
            let next = sys.step(&states[k], &u, &bins[k]);
            inputs.push(u);
            states.push(next);
        }
    }
    let lifted = build_lifted(&sys, &schedule, n, &[]).unwrap();
    let oracle2 = lifted
        .set
        .containment_oracle(ContainsSettings::default())
        .unwrap();
    let z = lifted.index.stack(&states, &bins, &inputs);
    assert!(oracle2.contains(&z).unwrap().holds());

    // The same ride with sentinel labels shifted by one step cannot be
    // represented: step k's state is not in step k's shifted box under
    // a static map assumption.
    let static_schedule = MapSchedule::fixed(
        build_map(
            vec![
                box_region("sentinel", RegionRole::Goal, [0.0, 0.0], [1.0, 4.0]),
                box_region("bg", RegionRole::Free, [0.0, 0.0], [6.0, 4.0]),
            ],
            PartitionKind::Ncp,
            &validation(),
        )
        .unwrap(),
    );
    let sys_static = system(&static_schedule, &[0.5, 2.0, 1.0, 0.0]);
    let lifted_static = build_lifted(&sys_static, &static_schedule, n, &[]).unwrap();
    let oracle_static = lifted_static
        .set
        .containment_oracle(ContainsSettings::default())
        .unwrap();
    let z_static = lifted_static.index.stack(&states, &bins, &inputs);
    assert!(
        !oracle_static.contains(&z_static).unwrap().holds(),
        "static map must reject the sentinel-riding labels"
    );
    let _ = oracle;
}
