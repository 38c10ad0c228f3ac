use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use zonoplan_cli::config::ScenarioConfig;
use zonoplan_cli::scenario::{run_scenario, validate_partition};
use zonoplan_cli::write_artifacts;

#[derive(Parser)]
#[command(name = "zonoplan", about = "MTL motion planning with hybrid zonotopes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a scenario end to end and emit artifacts.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        /// Relative optimality gap (overrides the scenario file).
        #[arg(long)]
        gap: Option<f64>,
        /// Solver mode: bnb, bruteforce, or export.
        #[arg(long)]
        mode: Option<String>,
        /// Output directory (default `out/<scenario name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override for the scenario's random elements.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a scenario's partition without solving.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run the exhaustive operator-encoding equivalence suite.
    EncodeCheck {
        /// Largest window length to enumerate.
        #[arg(long, default_value_t = 4)]
        tau: usize,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Plan {
            scenario,
            gap,
            mode,
            out,
            seed,
        } => {
            let mut cfg = ScenarioConfig::load(&scenario)
                .with_context(|| format!("loading {}", scenario.display()))?;
            if let Some(gap) = gap {
                cfg.solver.gap = gap;
            }
            if let Some(mode) = mode {
                cfg.solver.mode = mode;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let artifacts = run_scenario(&cfg)?;
            let dir = out.unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
            write_artifacts(&artifacts, &dir)?;
            println!(
                "{}: {} (objective {}, gap {}, {} nodes, {} ms)",
                cfg.name,
                artifacts.summary.status,
                artifacts
                    .summary
                    .objective
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_else(|| "-".into()),
                artifacts
                    .summary
                    .gap
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "-".into()),
                artifacts.summary.nodes,
                artifacts.summary.wall_ms,
            );
            println!("artifacts written to {}", dir.display());
            Ok(())
        }
        Command::Validate { scenario } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            for line in validate_partition(&cfg)? {
                println!("{line}");
            }
            println!("partition valid");
            Ok(())
        }
        Command::EncodeCheck { tau } => {
            let checks = zonoplan::mtl::operator_equivalence_suite(tau, true);
            let mut failures = 0;
            for c in &checks {
                println!(
                    "{:<14} tau={} assignments={:<6} mismatches={}",
                    c.operator, c.tau, c.assignments, c.mismatches
                );
                failures += c.mismatches;
            }
            if failures > 0 {
                anyhow::bail!("{failures} mismatches between encodings and semantics");
            }
            println!("all operator encodings match trace semantics up to tau={tau}");
            Ok(())
        }
    }
}
