//! Two-vehicle delivery scenario: a fast delivery vehicle picks up
//! packages from a slow cargo truck and drops them at delivery
//! locations.
//!
//! The planning state stacks both planar double integrators, a package
//! counter, and the residual position `r = pos1 - pos2`:
//! `[x1(4), x2(4), p, r(2)]`. Package pickups and deliveries are
//! region-dependent disturbances on the counter row: +1 while the
//! exchange region (residual inside the outer hexagon) is active, -1
//! on delivery regions. The collision keep-out (residual inside the
//! inner hexagon) is enforced by a per-step residual constraint set
//! built as a union of six wedges; speed and acceleration caps are
//! inscribed regular hexagons per vehicle.

use nalgebra::{DMatrix, DVector};

use zonoplan::reach::{
    build_map, LtiSystem, MapSchedule, MapValidation, PartitionKind, RegionRole, RegionSpec,
    StateConstraint,
};
use zonoplan::set::{union_of_polytopes, HPolytope, HybridZonotope, Zonotope};
use zonoplan::solve::PlanSolution;
use zonoplan::SpMat;

use crate::config::ScenarioConfig;
use crate::scenario::BuiltScenario;
use crate::PipelineError;

const DIM: usize = 11;
const P_IDX: usize = 8;
const R_DIMS: [usize; 2] = [9, 10];

fn planar_blocks(dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.0, dt, 0.0, //
            0.0, 1.0, 0.0, dt, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ],
    );
    let b = DMatrix::from_row_slice(
        4,
        2,
        &[
            0.5 * dt * dt,
            0.0,
            0.0,
            0.5 * dt * dt,
            dt,
            0.0,
            0.0,
            dt,
        ],
    );
    (a, b)
}

fn stacked_dynamics(dt: f64) -> (SpMat, SpMat) {
    let (a4, b4) = planar_blocks(dt);
    let mut at = Vec::new();
    let mut bt = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            if a4[(i, j)] != 0.0 {
                at.push((i, j, a4[(i, j)]));
                at.push((4 + i, 4 + j, a4[(i, j)]));
            }
        }
        for j in 0..2 {
            if b4[(i, j)] != 0.0 {
                bt.push((i, j, b4[(i, j)]));
                bt.push((4 + i, 2 + j, b4[(i, j)]));
            }
        }
    }
    // Package counter persists between steps.
    at.push((P_IDX, P_IDX, 1.0));
    // Residual rows: H A x1 - H A x2 and H B u1 - H B u2, with H the
    // position selector.
    for (row, pos_row) in R_DIMS.iter().zip(0..2) {
        for j in 0..4 {
            if a4[(pos_row, j)] != 0.0 {
                at.push((*row, j, a4[(pos_row, j)]));
                at.push((*row, 4 + j, -a4[(pos_row, j)]));
            }
        }
        for j in 0..2 {
            if b4[(pos_row, j)] != 0.0 {
                bt.push((*row, j, b4[(pos_row, j)]));
                bt.push((*row, 2 + j, -b4[(pos_row, j)]));
            }
        }
    }
    (
        SpMat::from_triplets(DIM, DIM, &at),
        SpMat::from_triplets(DIM, 4, &bt),
    )
}

/// Hexagon edge normals (pointing outward) and the apothem for a
/// regular hexagon with circumradius `r` centered at the origin.
fn hexagon_edges(r: f64) -> (Vec<[f64; 2]>, f64) {
    let apothem = r * 3.0_f64.sqrt() / 2.0;
    let normals = (0..6)
        .map(|k| {
            let a = (30.0 + 60.0 * k as f64).to_radians();
            [a.cos(), a.sin()]
        })
        .collect();
    (normals, apothem)
}

/// The residual feasibility set: everything in the residual box except
/// the interior of the inner hexagon, as a union of six wedges (one
/// per hexagon edge).
fn residual_feasible_set(
    inner_radius: f64,
    r_lo: [f64; 2],
    r_hi: [f64; 2],
) -> Result<HybridZonotope, PipelineError> {
    let (normals, apothem) = hexagon_edges(inner_radius);
    let mut parts = Vec::with_capacity(6);
    for n in &normals {
        // n . r >= apothem, within the residual box.
        let mut tri = vec![(0, 0, -n[0]), (0, 1, -n[1])];
        let mut rhs = vec![-apothem];
        for d in 0..2 {
            tri.push((rhs.len(), d, 1.0));
            rhs.push(r_hi[d]);
            tri.push((rhs.len(), d, -1.0));
            rhs.push(-r_lo[d]);
        }
        let rows = rhs.len();
        parts.push(
            HPolytope::inequalities(
                SpMat::from_triplets(rows, 2, &tri),
                DVector::from_vec(rhs),
            )
            .expect("wedge polytope"),
        );
    }
    Ok(union_of_polytopes(&parts)?)
}

/// Plan-level checks and flat-output reconstruction for the scenario.
pub struct TwoAgentChecks {
    pub inner_radius: f64,
    pub exchange_col: usize,
    pub delivery_cols: Vec<usize>,
}

impl TwoAgentChecks {
    /// Signed clearance of the residual from the inner hexagon:
    /// largest `n . r - apothem` over the edges; negative means inside
    /// the keep-out.
    pub fn keepout_margin(&self, r: [f64; 2]) -> f64 {
        let (normals, apothem) = hexagon_edges(self.inner_radius);
        normals
            .iter()
            .map(|n| n[0] * r[0] + n[1] * r[1] - apothem)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn validate(&self, plan: &PlanSolution) -> Result<(), PipelineError> {
        for (k, x) in plan.states.iter().enumerate() {
            let margin = self.keepout_margin([x[R_DIMS[0]], x[R_DIMS[1]]]);
            if margin < -1e-6 {
                return Err(PipelineError::Validation(format!(
                    "residual enters the keep-out at step {k} (margin {margin:.3e})"
                )));
            }
            let p = x[P_IDX];
            if (p - p.round()).abs() > 1e-6 || !(-1e-6..=1.0 + 1e-6).contains(&p) {
                return Err(PipelineError::Validation(format!(
                    "package state {p} at step {k} is not a 0/1 value"
                )));
            }
        }
        for k in 0..plan.states.len() - 1 {
            let delta = plan.states[k + 1][P_IDX].round() - plan.states[k][P_IDX].round();
            let exchanging = plan.indicators[k][self.exchange_col] == 1.0;
            let delivering = self
                .delivery_cols
                .iter()
                .any(|&c| plan.indicators[k][c] == 1.0);
            let want = f64::from(exchanging as i8 - delivering as i8);
            if delta != want {
                return Err(PipelineError::Validation(format!(
                    "package delta {delta} at step {k} (exchange {exchanging}, delivery {delivering})"
                )));
            }
        }
        for &c in &self.delivery_cols {
            if !plan.indicators.iter().any(|row| row[c] == 1.0) {
                return Err(PipelineError::Validation(format!(
                    "delivery region column {c} never visited"
                )));
            }
        }
        Ok(())
    }

    /// Reconstructed unicycle commands per vehicle:
    /// `v = sqrt(vx^2 + vy^2)`, `theta = atan2(vy, vx)`,
    /// `omega = (vx ay - vy ax) / v^2`.
    pub fn flat_outputs_csv(&self, plan: &PlanSolution) -> String {
        let mut s = String::from("step,v1,theta1,omega1,v2,theta2,omega2\n");
        let mut prev_theta = [0.0_f64; 2];
        for k in 0..plan.states.len() {
            s.push_str(&k.to_string());
            for (veh, (voff, uoff)) in [(2usize, 0usize), (6, 2)].iter().enumerate() {
                let vx = plan.states[k][*voff];
                let vy = plan.states[k][*voff + 1];
                let v2 = vx * vx + vy * vy;
                let v = v2.sqrt();
                let theta = if v2 > 1e-12 {
                    vy.atan2(vx)
                } else {
                    prev_theta[veh]
                };
                prev_theta[veh] = theta;
                let omega = if k < plan.inputs.len() && v2 > 1e-12 {
                    let ax = plan.inputs[k][*uoff];
                    let ay = plan.inputs[k][*uoff + 1];
                    (vx * ay - vy * ax) / v2
                } else {
                    0.0
                };
                s.push_str(&format!(",{v:?},{theta:?},{omega:?}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn build(cfg: &ScenarioConfig) -> Result<BuiltScenario, PipelineError> {
    let ta = cfg
        .two_agent
        .as_ref()
        .ok_or_else(|| PipelineError::Config("two-agent template needs [two_agent]".into()))?;
    if cfg.state_dim() != DIM {
        return Err(PipelineError::Config(format!(
            "two-agent workspace must be {DIM}-dimensional"
        )));
    }
    if !cfg.regions.is_empty() {
        return Err(PipelineError::Config(
            "two-agent regions are generated; leave [[region]] empty".into(),
        ));
    }

    let ws_lo = &cfg.workspace.lo;
    let ws_hi = &cfg.workspace.hi;

    // Region list: exchange hexagon over the residual, deliveries over
    // the delivery vehicle position, terminal boxes over both
    // positions, and the background.
    let mut regions = Vec::new();
    let mut delivery_ids = Vec::new();
    {
        // Exchange: residual inside the outer hexagon.
        let hex = HPolytope::hexagon_on_dims(DIM, R_DIMS, [0.0, 0.0], ta.outer_radius);
        let bx = HPolytope::from_box(ws_lo, ws_hi);
        let mut tri = Vec::new();
        let mut rhs = Vec::new();
        for src in [&hex, &bx] {
            for i in 0..src.num_ineq() {
                for (j, v) in src.ineq_matrix.row(i) {
                    tri.push((rhs.len(), j, v));
                }
                rhs.push(src.ineq_rhs[i]);
            }
        }
        let rows = rhs.len();
        let poly = HPolytope::inequalities(
            SpMat::from_triplets(rows, DIM, &tri),
            DVector::from_vec(rhs),
        )
        .expect("exchange polytope");
        let mut disturbance = DVector::zeros(DIM);
        disturbance[P_IDX] = 1.0;
        regions.push(RegionSpec {
            id: "XCH".into(),
            polytope: poly,
            disturbance,
            role: RegionRole::Exchange,
        });
    }
    for (i, d) in ta.deliveries.iter().enumerate() {
        let id = format!("G{}", i + 1);
        delivery_ids.push(id.clone());
        let mut lo = ws_lo.clone();
        let mut hi = ws_hi.clone();
        for (k, &dim) in d.dims.iter().enumerate() {
            lo[dim] = d.lo[k];
            hi[dim] = d.hi[k];
        }
        let mut disturbance = DVector::zeros(DIM);
        disturbance[P_IDX] = -1.0;
        regions.push(RegionSpec {
            id,
            polytope: HPolytope::from_box(&lo, &hi),
            disturbance,
            role: RegionRole::Goal,
        });
    }
    {
        // Terminal condition: both vehicles inside their home boxes.
        let mut lo = ws_lo.clone();
        let mut hi = ws_hi.clone();
        for t in &ta.terminal {
            for (k, &dim) in t.dims.iter().enumerate() {
                lo[dim] = t.lo[k];
                hi[dim] = t.hi[k];
            }
        }
        regions.push(RegionSpec {
            id: "XN".into(),
            polytope: HPolytope::from_box(&lo, &hi),
            disturbance: DVector::zeros(DIM),
            role: RegionRole::Goal,
        });
    }
    regions.push(RegionSpec {
        id: "BG".into(),
        polytope: HPolytope::from_box(ws_lo, ws_hi),
        disturbance: DVector::zeros(DIM),
        role: RegionRole::Free,
    });

    let validation = MapValidation {
        workspace_lo: ws_lo.clone(),
        workspace_hi: ws_hi.clone(),
        coverage_dims: vec![0, 1, 4, 5, 9, 10],
        coverage_resolution: cfg.map.coverage_resolution,
        keepouts: Vec::new(),
    };
    let map = build_map(regions, PartitionKind::Ncp, &validation)?;
    let exchange_col = map.region_index("XCH").expect("exchange region");
    let delivery_cols: Vec<usize> = delivery_ids
        .iter()
        .map(|id| map.region_index(id).expect("delivery region"))
        .collect();
    let schedule = MapSchedule::fixed(map);

    // Dynamics and hexagonal input set.
    let (a, b) = stacked_dynamics(ta.dt);
    let w = schedule.at(0).disturbance_matrix();
    let input_set: HybridZonotope = {
        let h1: HybridZonotope = Zonotope::hexagon(ta.a_max[0]).into();
        let h2: HybridZonotope = Zonotope::hexagon(ta.a_max[1]).into();
        h1.cartesian_product(&h2)
    };
    let sys = LtiSystem::new(
        a,
        b,
        w,
        DVector::from_column_slice(&cfg.dynamics.x0),
        vec![input_set],
    )?;

    // Extra per-step sets: residual keep-out union and per-vehicle
    // speed hexagons.
    let r_lo = [ws_lo[R_DIMS[0]], ws_lo[R_DIMS[1]]];
    let r_hi = [ws_hi[R_DIMS[0]], ws_hi[R_DIMS[1]]];
    let residual_set = residual_feasible_set(ta.inner_radius, r_lo, r_hi)?;
    let speed1: HybridZonotope = Zonotope::hexagon(ta.v_max[0]).into();
    let speed2: HybridZonotope = Zonotope::hexagon(ta.v_max[1]).into();
    let mut extras = Vec::new();
    for k in 0..=cfg.horizon {
        extras.push(StateConstraint {
            label: format!("residual-keepout@{k}"),
            step: k,
            state_dims: R_DIMS.to_vec(),
            set: residual_set.clone(),
        });
        extras.push(StateConstraint {
            label: format!("speed1@{k}"),
            step: k,
            state_dims: vec![2, 3],
            set: speed1.clone(),
        });
        extras.push(StateConstraint {
            label: format!("speed2@{k}"),
            step: k,
            state_dims: vec![6, 7],
            set: speed2.clone(),
        });
    }

    let formula = parse_two_agent_formula(cfg)?;
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(&cfg.cost.q_diag));
    let r = DMatrix::from_diagonal(&DVector::from_column_slice(&cfg.cost.r_diag));
    let qn = DMatrix::from_diagonal(&DVector::from_column_slice(&cfg.cost.qn_diag));

    Ok(BuiltScenario {
        cfg: cfg.clone(),
        sys,
        schedule,
        extras,
        formula,
        q,
        r,
        qn,
        two_agent: Some(TwoAgentChecks {
            inner_radius: ta.inner_radius,
            exchange_col,
            delivery_cols,
        }),
    })
}

fn parse_two_agent_formula(cfg: &ScenarioConfig) -> Result<zonoplan::mtl::MtlFormula, PipelineError> {
    Ok(parse_formula_str(&cfg.formula.text)?)
}

fn parse_formula_str(text: &str) -> Result<zonoplan::mtl::MtlFormula, zonoplan::mtl::MtlError> {
    zonoplan::mtl::parse_formula(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_rows_track_position_difference() {
        let (a, b) = stacked_dynamics(1.0);
        // x1 at (1, 0) moving +x with 0.5, x2 static at (0, 0).
        let mut x = DVector::zeros(DIM);
        x[0] = 1.0;
        x[2] = 0.5;
        x[9] = 1.0;
        let u = DVector::zeros(4);
        let next = a.matvec(&x) + b.matvec(&u);
        assert!((next[0] - 1.5).abs() < 1e-12);
        assert!((next[9] - 1.5).abs() < 1e-12, "residual follows x1 - x2");
        assert_eq!(next[P_IDX], 0.0);
    }

    #[test]
    fn package_row_accumulates() {
        let (a, _) = stacked_dynamics(1.0);
        let mut x = DVector::zeros(DIM);
        x[P_IDX] = 1.0;
        let next = a.matvec(&x);
        assert_eq!(next[P_IDX], 1.0, "package state persists");
    }

    #[test]
    fn keepout_margin_signs() {
        let checks = TwoAgentChecks {
            inner_radius: 0.4,
            exchange_col: 0,
            delivery_cols: vec![],
        };
        assert!(checks.keepout_margin([0.0, 0.0]) < 0.0, "center is inside");
        assert!(checks.keepout_margin([1.0, 0.0]) > 0.0, "far point outside");
        // A vertex of the inner hexagon sits on the boundary.
        let m = checks.keepout_margin([0.4, 0.0]);
        assert!(m.abs() < 1e-12, "vertex margin {m}");
    }

    #[test]
    fn residual_union_excludes_inner_hexagon() {
        let set = residual_feasible_set(0.4, [-2.0, -2.0], [2.0, 2.0]).unwrap();
        let oracle = set
            .containment_oracle(zonoplan::set::ContainsSettings::default())
            .unwrap();
        let inside = DVector::from_vec(vec![0.05, 0.05]);
        assert!(!oracle.contains(&inside).unwrap().holds());
        let ring = DVector::from_vec(vec![0.5, 0.0]);
        assert!(oracle.contains(&ring).unwrap().holds());
        let far = DVector::from_vec(vec![1.5, -1.2]);
        assert!(oracle.contains(&far).unwrap().holds());
    }
}
