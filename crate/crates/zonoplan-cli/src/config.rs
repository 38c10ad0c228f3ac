//! Scenario files: structured text (TOML) with nested tables; matrices
//! as row-major lists. The schema is documented in
//! `docs/scenario-schema.md`. Parsing is lossless: parse, serialize,
//! parse again is idempotent.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::PipelineError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub horizon: usize,
    /// Seed for the scenario's random elements (wind jitter).
    #[serde(default)]
    pub seed: u64,
    pub workspace: Workspace,
    pub dynamics: Dynamics,
    pub map: MapSection,
    #[serde(rename = "region", default)]
    pub regions: Vec<RegionConfig>,
    pub cost: CostSection,
    pub formula: FormulaSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub soc: Option<SocSection>,
    #[serde(default)]
    pub wind: Option<WindSection>,
    #[serde(default)]
    pub two_agent: Option<TwoAgentSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Dynamics {
    /// One of `double-integrator`, `double-integrator-soc`,
    /// `two-agent`, or `custom` (matrices given explicitly).
    pub template: String,
    #[serde(default)]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b: Option<Vec<Vec<f64>>>,
    pub x0: Vec<f64>,
    pub input_lo: Vec<f64>,
    pub input_hi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    /// `dcp`, `ncp`, or `mixed`.
    pub kind: String,
    pub coverage_dims: Vec<usize>,
    pub coverage_resolution: f64,
    #[serde(rename = "keepout", default)]
    pub keepouts: Vec<KeepoutConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KeepoutConfig {
    pub dims: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub id: String,
    /// `free`, `obstacle`, `goal`, `key`, `door`, `charge`, `exchange`.
    pub role: String,
    /// Dimensions the box below constrains; all other coordinates take
    /// the workspace bounds.
    pub dims: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Constant drift of the box per step (moving targets rebound off
    /// the workspace walls). Same length as `dims`.
    #[serde(default)]
    pub velocity: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    /// Diagonals of the stage, input, and terminal cost matrices.
    pub q_diag: Vec<f64>,
    pub r_diag: Vec<f64>,
    pub qn_diag: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FormulaSection {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub gap: f64,
    pub node_budget: usize,
    /// `bnb`, `bruteforce`, or `export`.
    pub mode: String,
    #[serde(default = "default_bin_budget")]
    pub bin_budget: usize,
}

fn default_bin_budget() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SocSection {
    /// State index of the charge coordinate.
    pub state_index: usize,
    pub charge_rate: f64,
    pub discharge_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WindSection {
    pub magnitude: f64,
    pub jitter_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TwoAgentSection {
    /// Discretization period of the underlying planar models.
    pub dt: f64,
    /// Exchange allowed within this vehicle separation.
    pub outer_radius: f64,
    /// Collision keep-out radius.
    pub inner_radius: f64,
    /// Per-vehicle speed caps (hexagon circumradius).
    pub v_max: [f64; 2],
    /// Per-vehicle acceleration caps (hexagon circumradius).
    pub a_max: [f64; 2],
    /// Delivery boxes for the delivery vehicle (position dims).
    pub deliveries: Vec<KeepoutConfig>,
    /// Terminal boxes (delivery vehicle, then truck).
    pub terminal: Vec<KeepoutConfig>,
}

impl ScenarioConfig {
    pub fn from_str_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, PipelineError> {
        toml::to_string_pretty(self).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_str_toml(&text)
    }

    pub fn state_dim(&self) -> usize {
        self.workspace.lo.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "sample"
horizon = 4
seed = 3

[workspace]
lo = [0.0, 0.0, -1.0, -1.0]
hi = [4.0, 4.0, 1.0, 1.0]

[dynamics]
template = "double-integrator"
x0 = [1.0, 1.0, 0.0, 0.0]
input_lo = [-0.5, -0.5]
input_hi = [0.5, 0.5]

[map]
kind = "ncp"
coverage_dims = [0, 1]
coverage_resolution = 0.5

[[region]]
id = "bg"
role = "free"
dims = [0, 1]
lo = [0.0, 0.0]
hi = [4.0, 4.0]

[[region]]
id = "G"
role = "goal"
dims = [0, 1]
lo = [3.0, 3.0]
hi = [4.0, 4.0]

[cost]
q_diag = [0.0, 0.0, 1.0, 1.0]
r_diag = [1.0, 1.0]
qn_diag = [0.0, 0.0, 1.0, 1.0]

[formula]
text = "(eventually 0 4 G)"

[solver]
gap = 0.01
node_budget = 10000
mode = "bnb"
"#;

    #[test]
    fn roundtrip_is_idempotent() {
        let cfg = ScenarioConfig::from_str_toml(SAMPLE).unwrap();
        let text = cfg.to_toml().unwrap();
        let cfg2 = ScenarioConfig::from_str_toml(&text).unwrap();
        assert_eq!(cfg, cfg2);
        let text2 = cfg2.to_toml().unwrap();
        assert_eq!(text, text2);
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = SAMPLE.replace("[solver]", "[solver]\nwhatever = 3");
        assert!(ScenarioConfig::from_str_toml(&bad).is_err());
    }
}
