//! Scenario ingestion and the end-to-end pipeline:
//! map -> lift -> compile formula -> intersect -> assemble -> solve ->
//! decode -> validate -> emit.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use zonoplan::mtl::{compile_cnf, parse_formula, MtlFormula};
use zonoplan::reach::{
    apply_mtl, build_lifted, build_map, AugmentedMap, LiftedReachSet, LtiSystem, MapSchedule,
    MapValidation, PartitionKind, RegionRole, RegionSpec, StateConstraint,
};
use zonoplan::set::{Complexity, HPolytope, HybridZonotope};
use zonoplan::solve::{
    assemble, decode, solve_bnb, solve_bruteforce, Miqp, PlanSolution, SolveReport, SolveStatus,
    ValidationCtx,
};
use zonoplan::SpMat;

use crate::config::{RegionConfig, ScenarioConfig};
use crate::plot::render_svg;
use crate::twoagent::{self, TwoAgentChecks};
use crate::PipelineError;

pub fn parse_role(role: &str) -> Result<RegionRole, PipelineError> {
    Ok(match role {
        "free" => RegionRole::Free,
        "obstacle" => RegionRole::Obstacle,
        "goal" => RegionRole::Goal,
        "key" => RegionRole::Key,
        "door" => RegionRole::Door,
        "charge" => RegionRole::Charge,
        "exchange" => RegionRole::Exchange,
        other => return Err(PipelineError::Config(format!("unknown role `{other}`"))),
    })
}

pub fn parse_kind(kind: &str) -> Result<PartitionKind, PipelineError> {
    Ok(match kind {
        "dcp" => PartitionKind::Dcp,
        "ncp" => PartitionKind::Ncp,
        "mixed" => PartitionKind::Mixed,
        other => return Err(PipelineError::Config(format!("unknown map kind `{other}`"))),
    })
}

/// Full-dimension box polytope: declared dims from the region entry,
/// every other coordinate at the workspace bounds.
fn region_box(
    cfg: &ScenarioConfig,
    dims: &[usize],
    lo_d: &[f64],
    hi_d: &[f64],
) -> HPolytope {
    let n = cfg.state_dim();
    let mut lo = cfg.workspace.lo.clone();
    let mut hi = cfg.workspace.hi.clone();
    for (k, &d) in dims.iter().enumerate() {
        lo[d] = lo_d[k];
        hi[d] = hi_d[k];
    }
    let _ = n;
    HPolytope::from_box(&lo, &hi)
}

/// Rebound kinematics for moving boxes: centers advance at a fixed
/// velocity and reflect off the workspace walls (box edges never
/// leave the workspace). Positions for all steps are precomputed
/// before planning.
pub fn rebound_centers(
    c0: &[f64],
    vel: &[f64],
    half: &[f64],
    lo: &[f64],
    hi: &[f64],
    steps: usize,
) -> Vec<Vec<f64>> {
    let dims = c0.len();
    let mut centers = Vec::with_capacity(steps + 1);
    let mut c = c0.to_vec();
    let mut v = vel.to_vec();
    centers.push(c.clone());
    for _ in 0..steps {
        for d in 0..dims {
            c[d] += v[d];
            let lo_d = lo[d] + half[d];
            let hi_d = hi[d] - half[d];
            if c[d] > hi_d {
                c[d] = 2.0 * hi_d - c[d];
                v[d] = -v[d];
            }
            if c[d] < lo_d {
                c[d] = 2.0 * lo_d - c[d];
                v[d] = -v[d];
            }
        }
        centers.push(c.clone());
    }
    centers
}

fn region_disturbance(
    cfg: &ScenarioConfig,
    region: &RegionConfig,
    role: RegionRole,
    rng: &mut ChaCha8Rng,
) -> DVector<f64> {
    let n = cfg.state_dim();
    let mut d = DVector::zeros(n);
    if let Some(soc) = &cfg.soc {
        d[soc.state_index] = if role == RegionRole::Charge {
            soc.charge_rate
        } else {
            soc.discharge_rate
        };
    }
    if let Some(wind) = &cfg.wind {
        // Wind points perpendicular (counterclockwise) to the ray from
        // the workspace center to the region centroid, with a seeded
        // angular jitter; it acts on the position coordinates.
        let cx = 0.5 * (cfg.workspace.lo[0] + cfg.workspace.hi[0]);
        let cy = 0.5 * (cfg.workspace.lo[1] + cfg.workspace.hi[1]);
        let (mut rx, mut ry) = (0.0, 0.0);
        for (k, &dim) in region.dims.iter().enumerate() {
            if dim == 0 {
                rx = 0.5 * (region.lo[k] + region.hi[k]) - cx;
            }
            if dim == 1 {
                ry = 0.5 * (region.lo[k] + region.hi[k]) - cy;
            }
        }
        let base = ry.atan2(rx) + std::f64::consts::FRAC_PI_2;
        let jitter = rng.gen_range(-wind.jitter_deg..=wind.jitter_deg).to_radians();
        let angle = base + jitter;
        d[0] += wind.magnitude * angle.cos();
        d[1] += wind.magnitude * angle.sin();
    }
    d
}

pub struct BuiltScenario {
    pub cfg: ScenarioConfig,
    pub sys: LtiSystem,
    pub schedule: MapSchedule,
    pub extras: Vec<StateConstraint>,
    pub formula: MtlFormula,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub qn: DMatrix<f64>,
    pub two_agent: Option<TwoAgentChecks>,
}

fn template_matrices(cfg: &ScenarioConfig) -> Result<(SpMat, SpMat), PipelineError> {
    let d = &cfg.dynamics;
    match d.template.as_str() {
        "double-integrator" => {
            let (a, b, _) = zonoplan::reach::system::double_integrator(0);
            Ok((a, b))
        }
        "double-integrator-soc" => {
            // [x, y, vx, vy, e]: planar double integrator plus a charge
            // state that only the region disturbances move.
            let a = SpMat::from_triplets(
                5,
                5,
                &[
                    (0, 0, 1.0),
                    (0, 2, 1.0),
                    (1, 1, 1.0),
                    (1, 3, 1.0),
                    (2, 2, 1.0),
                    (3, 3, 1.0),
                    (4, 4, 1.0),
                ],
            );
            let b = SpMat::from_triplets(5, 2, &[(2, 0, 1.0), (3, 1, 1.0)]);
            Ok((a, b))
        }
        "custom" => {
            let a = d
                .a
                .as_ref()
                .ok_or_else(|| PipelineError::Config("custom dynamics need `a`".into()))?;
            let b = d
                .b
                .as_ref()
                .ok_or_else(|| PipelineError::Config("custom dynamics need `b`".into()))?;
            Ok((dense_rows_to_sp(a), dense_rows_to_sp(b)))
        }
        other => Err(PipelineError::Config(format!(
            "unknown dynamics template `{other}` (two-agent scenarios use scenario_two_agent)"
        ))),
    }
}

pub fn dense_rows_to_sp(rows: &[Vec<f64>]) -> SpMat {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut tri = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                tri.push((i, j, v));
            }
        }
    }
    SpMat::from_triplets(nrows, ncols, &tri)
}

fn map_validation(cfg: &ScenarioConfig) -> MapValidation {
    MapValidation {
        workspace_lo: cfg.workspace.lo.clone(),
        workspace_hi: cfg.workspace.hi.clone(),
        coverage_dims: cfg.map.coverage_dims.clone(),
        coverage_resolution: cfg.map.coverage_resolution,
        keepouts: cfg
            .map
            .keepouts
            .iter()
            .map(|k| {
                HPolytope::from_box_on_dims(cfg.state_dim(), &k.dims, &k.lo, &k.hi)
            })
            .collect(),
    }
}

/// Assemble the per-step maps (a single map when nothing moves).
fn build_schedule(cfg: &ScenarioConfig) -> Result<MapSchedule, PipelineError> {
    let kind = parse_kind(&cfg.map.kind)?;
    let validation = map_validation(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Disturbances are fixed per region (seeded once, in region order).
    let mut disturbances = Vec::new();
    for rc in &cfg.regions {
        let role = parse_role(&rc.role)?;
        disturbances.push(region_disturbance(cfg, rc, role, &mut rng));
    }

    let moving = cfg.regions.iter().any(|r| r.velocity.is_some());
    let steps = if moving { cfg.horizon + 1 } else { 1 };
    let mut maps = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut regions = Vec::with_capacity(cfg.regions.len());
        for (idx, rc) in cfg.regions.iter().enumerate() {
            let role = parse_role(&rc.role)?;
            let poly = match &rc.velocity {
                None => region_box(cfg, &rc.dims, &rc.lo, &rc.hi),
                Some(vel) => {
                    let half: Vec<f64> = rc
                        .lo
                        .iter()
                        .zip(&rc.hi)
                        .map(|(l, h)| 0.5 * (h - l))
                        .collect();
                    let c0: Vec<f64> = rc
                        .lo
                        .iter()
                        .zip(&rc.hi)
                        .map(|(l, h)| 0.5 * (l + h))
                        .collect();
                    let ws_lo: Vec<f64> =
                        rc.dims.iter().map(|&d| cfg.workspace.lo[d]).collect();
                    let ws_hi: Vec<f64> =
                        rc.dims.iter().map(|&d| cfg.workspace.hi[d]).collect();
                    let centers =
                        rebound_centers(&c0, vel, &half, &ws_lo, &ws_hi, cfg.horizon);
                    let c = &centers[k];
                    let lo: Vec<f64> =
                        c.iter().zip(&half).map(|(ci, hi)| ci - hi).collect();
                    let hi: Vec<f64> =
                        c.iter().zip(&half).map(|(ci, hi)| ci + hi).collect();
                    region_box(cfg, &rc.dims, &lo, &hi)
                }
            };
            regions.push(RegionSpec {
                id: rc.id.clone(),
                polytope: poly,
                disturbance: disturbances[idx].clone(),
                role,
            });
        }
        maps.push(build_map(regions, kind, &validation)?);
    }
    if moving {
        Ok(MapSchedule::time_varying(maps)?)
    } else {
        Ok(MapSchedule::fixed(maps.pop().expect("one map")))
    }
}

/// Build everything the pipeline needs from a scenario file.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<BuiltScenario, PipelineError> {
    if cfg.dynamics.template == "two-agent" {
        return twoagent::build(cfg);
    }
    if cfg.regions.is_empty() {
        return Err(PipelineError::Config("no regions declared".into()));
    }
    let schedule = build_schedule(cfg)?;
    let (a, b) = template_matrices(cfg)?;
    let w = schedule.at(0).disturbance_matrix();
    let input_set = HybridZonotope::from_box(&cfg.dynamics.input_lo, &cfg.dynamics.input_hi);
    let sys = LtiSystem::new(
        a,
        b,
        w,
        DVector::from_column_slice(&cfg.dynamics.x0),
        vec![input_set],
    )?;
    let formula = parse_formula(&cfg.formula.text)?;
    let n = cfg.state_dim();
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(&cfg.cost.q_diag));
    let r = DMatrix::from_diagonal(&DVector::from_column_slice(&cfg.cost.r_diag));
    let qn = DMatrix::from_diagonal(&DVector::from_column_slice(&cfg.cost.qn_diag));
    if q.nrows() != n || qn.nrows() != n {
        return Err(PipelineError::Config(format!(
            "cost diagonals must have state dimension {n}"
        )));
    }
    Ok(BuiltScenario {
        cfg: cfg.clone(),
        sys,
        schedule,
        extras: Vec::new(),
        formula,
        q,
        r,
        qn,
        two_agent: None,
    })
}

/// Per-stage complexity counts reported in the summary.
#[derive(Debug, Clone, Serialize)]
pub struct StageCounts {
    pub n_g: usize,
    pub n_b: usize,
    pub n_c: usize,
}

impl From<Complexity> for StageCounts {
    fn from(c: Complexity) -> Self {
        Self {
            n_g: c.n_g,
            n_b: c.n_b,
            n_c: c.n_c,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub mode: String,
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes: usize,
    pub wall_ms: u128,
    pub map: StageCounts,
    pub reach: StageCounts,
    pub feasible: StageCounts,
    pub reach_expected: StageCounts,
    pub feasible_expected: StageCounts,
    pub clause_deltas: Vec<StageCounts>,
    pub validations: Vec<String>,
}

pub struct RunArtifacts {
    pub summary: Summary,
    pub plan: Option<PlanSolution>,
    pub report: Option<SolveReport>,
    pub miqp: Miqp,
    pub lifted: LiftedReachSet,
    pub trajectory_csv: String,
    pub indicators_csv: String,
    pub flat_csv: Option<String>,
    pub plot_svg: String,
    pub solver_log: String,
    pub mps: Option<String>,
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::OptimalAtGap => "optimal-at-gap",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::BudgetExhausted => "budget-exhausted",
    }
}

fn trajectory_csv(plan: &PlanSolution, region_ids: &[String]) -> String {
    let n_x = plan.states[0].len();
    let n_u = plan.inputs.first().map(|u| u.len()).unwrap_or(0);
    let mut s = String::from("step");
    for i in 0..n_x {
        s.push_str(&format!(",x{i}"));
    }
    for i in 0..n_u {
        s.push_str(&format!(",u{i}"));
    }
    for id in region_ids {
        s.push_str(&format!(",{id}"));
    }
    s.push('\n');
    for k in 0..plan.states.len() {
        s.push_str(&k.to_string());
        for i in 0..n_x {
            s.push_str(&format!(",{:?}", plan.states[k][i]));
        }
        for i in 0..n_u {
            if k < plan.inputs.len() {
                s.push_str(&format!(",{:?}", plan.inputs[k][i]));
            } else {
                s.push(',');
            }
        }
        for j in 0..region_ids.len() {
            s.push_str(&format!(",{}", plan.indicators[k][j] as i64));
        }
        s.push('\n');
    }
    s
}

fn indicators_csv(plan: &PlanSolution, region_ids: &[String]) -> String {
    let mut s = String::from("step");
    for id in region_ids {
        s.push_str(&format!(",{id}"));
    }
    s.push('\n');
    for (k, row) in plan.indicators.iter().enumerate() {
        s.push_str(&k.to_string());
        for j in 0..region_ids.len() {
            s.push_str(&format!(",{}", row[j] as i64));
        }
        s.push('\n');
    }
    s
}

/// Scenario-specific plan checks beyond the core decode validation.
fn extra_validations(
    built: &BuiltScenario,
    plan: &PlanSolution,
) -> Result<Vec<String>, PipelineError> {
    let mut notes = Vec::new();
    if let Some(soc) = &built.cfg.soc {
        let e = soc.state_index;
        for (k, x) in plan.states.iter().enumerate() {
            if !(-1e-9..=1.0 + 1e-9).contains(&x[e]) {
                return Err(PipelineError::Validation(format!(
                    "charge state {} out of [0,1] at step {k}",
                    x[e]
                )));
            }
        }
        let charge_cols: Vec<usize> = built
            .schedule
            .at(0)
            .regions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.role == RegionRole::Charge)
            .map(|(i, _)| i)
            .collect();
        for k in 0..plan.inputs.len() {
            let active_charge = charge_cols.iter().any(|&c| plan.indicators[k][c] == 1.0);
            let want = if active_charge {
                soc.charge_rate
            } else {
                soc.discharge_rate
            };
            let delta = plan.states[k + 1][e] - plan.states[k][e];
            if (delta - want).abs() > 1e-6 {
                return Err(PipelineError::Validation(format!(
                    "charge delta {delta} at step {k} differs from {want}"
                )));
            }
        }
        notes.push("soc-bounds-and-rates".into());
    }
    if let Some(checks) = &built.two_agent {
        checks.validate(plan)?;
        notes.push("two-agent-residual-and-package".into());
    }
    Ok(notes)
}

/// Run the full pipeline for a scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunArtifacts, PipelineError> {
    let built = build_scenario(cfg)?;
    let lifted = build_lifted(&built.sys, &built.schedule, cfg.horizon, &built.extras)?;
    let clauses = compile_cnf(&built.formula, cfg.horizon)?;
    let feasible = apply_mtl(&lifted, &clauses)?;

    // Table-row accounting per clause, asserted as integers.
    for (clause, delta) in clauses.iter().zip(&feasible.mtl_deltas) {
        if *delta != clause.kind.table_delta() {
            return Err(PipelineError::Validation(format!(
                "clause delta {delta} differs from the expected {}",
                clause.kind.table_delta()
            )));
        }
    }

    let miqp = assemble(&feasible, &built.q, &built.r, &built.qn)?;

    let mode = cfg.solver.mode.as_str();
    let (report, plan, mps) = match mode {
        "export" => {
            let text = zonoplan::solve::mps::write_mps_string(&miqp, &cfg.name);
            (None, None, Some(text))
        }
        "bnb" | "bruteforce" => {
            let report = if mode == "bnb" {
                solve_bnb(&miqp, cfg.solver.gap, cfg.solver.node_budget)?
            } else {
                solve_bruteforce(&miqp, cfg.solver.bin_budget)?
            };
            let plan = match &report.incumbent {
                Some(fp) => {
                    let ctx = ValidationCtx::new(&built.sys, &built.schedule, Some(&built.formula));
                    Some(decode(&miqp, fp, &ctx)?)
                }
                None => None,
            };
            (Some(report), plan, None)
        }
        other => {
            return Err(PipelineError::Config(format!(
                "unknown solver mode `{other}`"
            )))
        }
    };

    let mut validations = vec!["dynamics-indicators-formula".into()];
    if let Some(plan) = &plan {
        validations = extra_validations(&built, plan)?;
        validations.insert(0, "dynamics-indicators-formula".into());
    }

    let region_ids = built.schedule.region_ids();
    let summary = Summary {
        name: cfg.name.clone(),
        mode: mode.to_string(),
        status: report
            .as_ref()
            .map(|r| status_name(r.status).to_string())
            .unwrap_or_else(|| "exported".into()),
        objective: report.as_ref().map(|r| r.objective),
        bound: report.as_ref().map(|r| r.bound),
        gap: report.as_ref().map(|r| r.gap),
        nodes: report.as_ref().map(|r| r.nodes).unwrap_or(0),
        wall_ms: report.as_ref().map(|r| r.wall_time.as_millis()).unwrap_or(0),
        map: built.schedule.at(0).set.complexity().into(),
        reach: lifted.set.complexity().into(),
        feasible: feasible.set.complexity().into(),
        reach_expected: lifted.breakdown.expected_total().into(),
        feasible_expected: feasible.expected_complexity().into(),
        clause_deltas: feasible
            .mtl_deltas
            .iter()
            .map(|d| StageCounts::from(*d))
            .collect(),
        validations,
    };

    let trajectory_csv = plan
        .as_ref()
        .map(|p| trajectory_csv(p, &region_ids))
        .unwrap_or_else(|| "step\n".into());
    let indicators = plan
        .as_ref()
        .map(|p| indicators_csv(p, &region_ids))
        .unwrap_or_else(|| "step\n".into());
    let flat_csv = match (&plan, &built.two_agent) {
        (Some(p), Some(checks)) => Some(checks.flat_outputs_csv(p)),
        _ => None,
    };
    let plot_svg = render_svg(&built, plan.as_ref());
    let solver_log = report
        .as_ref()
        .map(|r| {
            let mut s = String::from("node,depth,bound,incumbent,gap\n");
            for l in &r.log {
                s.push_str(&l.to_line());
                s.push('\n');
            }
            s
        })
        .unwrap_or_default();

    Ok(RunArtifacts {
        summary,
        plan,
        report,
        miqp,
        lifted: feasible,
        trajectory_csv,
        indicators_csv: indicators,
        flat_csv,
        plot_svg,
        solver_log,
        mps,
    })
}

/// Partition validation only (the `validate` subcommand): runs the map
/// construction probes and reports the outcome per step.
pub fn validate_partition(cfg: &ScenarioConfig) -> Result<Vec<String>, PipelineError> {
    if cfg.dynamics.template == "two-agent" {
        let built = twoagent::build(cfg)?;
        return Ok(vec![format!(
            "two-agent map valid: {} regions, {} extra constraint sets",
            built.schedule.num_regions(),
            built.extras.len()
        )]);
    }
    let schedule = build_schedule(cfg)?;
    let mut lines = Vec::new();
    for k in 0..schedule.len() {
        let m: &AugmentedMap = schedule.at(k);
        lines.push(format!(
            "step {k}: {} regions, kind {:?}, complexity {}",
            m.num_regions(),
            m.kind,
            m.set.complexity()
        ));
    }
    Ok(lines)
}
