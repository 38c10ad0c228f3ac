//! Scenario ingestion, the planning pipeline, and artifact emission
//! for the `zonoplan` CLI.

pub mod config;
pub mod plot;
pub mod scenario;
pub mod twoagent;

use std::path::Path;

use thiserror::Error;

use scenario::RunArtifacts;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("[map] {0}")]
    Reach(#[from] zonoplan::reach::ReachError),
    #[error("[formula] {0}")]
    Mtl(#[from] zonoplan::mtl::MtlError),
    #[error("[solve] {0}")]
    Solve(#[from] zonoplan::solve::SolveError),
    #[error("[sets] {0}")]
    Set(#[from] zonoplan::set::SetError),
    #[error("plan validation failed: {0}")]
    Validation(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn write(path: &Path, body: &str) -> Result<(), PipelineError> {
    std::fs::write(path, body).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write every artifact of a run into `dir`.
pub fn write_artifacts(artifacts: &RunArtifacts, dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write(&dir.join("trajectory.csv"), &artifacts.trajectory_csv)?;
    write(&dir.join("indicators.csv"), &artifacts.indicators_csv)?;
    write(&dir.join("plot.svg"), &artifacts.plot_svg)?;
    write(&dir.join("solver.log"), &artifacts.solver_log)?;
    let summary = serde_json::to_string_pretty(&artifacts.summary)
        .map_err(|e| PipelineError::Config(format!("summary serialization: {e}")))?;
    write(&dir.join("summary.json"), &summary)?;
    if let Some(mps) = &artifacts.mps {
        write(&dir.join("model.mps"), mps)?;
    }
    if let Some(flat) = &artifacts.flat_csv {
        write(&dir.join("flat_outputs.csv"), flat)?;
    }
    Ok(())
}
