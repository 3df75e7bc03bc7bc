//! Pipeline orchestration behind the `latreg` binary: `synth` writes a
//! synthetic cohort, `run` executes preprocessing, training, diagnostics and
//! benchmarks into an output directory with a checksummed manifest, `report`
//! condenses a finished run into one JSON summary.

pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod report;

use std::path::Path;

use latreg::dataio::{generate_synthetic, SynthConfig};

pub use config::{BenchmarkConfig, DataSource, DiagnosticsConfig, RunConfig};
pub use manifest::{FileEntry, RunManifest, RunStatus, StageTiming};
pub use pipeline::cmd_run;
pub use report::{cmd_report, Summary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Runtime { stage: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime { .. } => 2,
        }
    }

    pub fn runtime(stage: &str, e: impl std::fmt::Display) -> Self {
        CliError::Runtime {
            stage: stage.to_string(),
            message: e.to_string(),
        }
    }
}

/// Writes `<stem>.csv` and `<stem>.truth.json` for a synthetic cohort.
pub fn cmd_synth(cfg: &SynthConfig, out_dir: &Path, stem: &str) -> Result<(), CliError> {
    config::validate_synth(cfg)?;
    if stem.is_empty() || stem.contains(['/', '\\']) {
        return Err(CliError::Config(format!("stem: invalid file stem {stem:?}")));
    }
    let cohort = generate_synthetic(cfg).map_err(|e| CliError::runtime("synth", e))?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::runtime("synth", e))?;
    cohort
        .write(cfg, out_dir, stem)
        .map_err(|e| CliError::runtime("synth", e))
}
