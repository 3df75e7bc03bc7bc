//! Run configuration (JSON) and its validation.

use std::path::{Path, PathBuf};

use latreg::benchmarks::{StepwiseConfig, SCREENING_SWEEP};
use latreg::dataio::{PreprocessConfig, SynthConfig};
use latreg::training::TrainConfig;
use latreg::Parallelism;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv { path: PathBuf, outcome: String },
    Synthetic(SynthConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub ci_level: f64,
    pub min_size: usize,
    /// Capped at the number of retained predictors.
    pub n_clusters: usize,
    pub top_k: usize,
    /// Top naming variables of a subgroup's dimension tested for interaction.
    pub interaction_predictors: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            ci_level: 0.95,
            min_size: 5,
            n_clusters: 21,
            top_k: 10,
            interaction_predictors: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub enabled: bool,
    pub pca: bool,
    pub plain_ae: bool,
    /// Train a plain autoencoder for every seed, not only the representative one.
    pub plain_ae_all_seeds: bool,
    pub stepwise: bool,
    pub screening_sweep: Vec<f64>,
    pub backward_threshold: f64,
    pub forward_threshold: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let s = StepwiseConfig::default();
        BenchmarkConfig {
            enabled: true,
            pca: true,
            plain_ae: true,
            plain_ae_all_seeds: false,
            stepwise: true,
            screening_sweep: SCREENING_SWEEP.to_vec(),
            backward_threshold: s.backward_threshold,
            forward_threshold: s.forward_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub benchmarks: BenchmarkConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub parallelism: Parallelism,
    pub output_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    (0..15).collect()
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

/// Reads a JSON file into `T`, reporting parse failures as config errors.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn validate_synth(cfg: &SynthConfig) -> Result<(), CliError> {
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match &self.data {
            DataSource::Csv { path, outcome } => {
                if !path.is_file() {
                    return Err(invalid("data.csv.path", format!("{} is not a file", path.display())));
                }
                if outcome.is_empty() {
                    return Err(invalid("data.csv.outcome", "must name a column"));
                }
            }
            DataSource::Synthetic(s) => validate_synth(s)?,
        }
        let pp = &self.preprocess;
        if !(pp.train_fraction > 0.0 && pp.train_fraction <= 1.0) {
            return Err(invalid("preprocess.train_fraction", "must be in (0, 1]"));
        }
        if !(pp.variance_threshold >= 0.0 && pp.variance_threshold.is_finite()) {
            return Err(invalid("preprocess.variance_threshold", "must be finite and non-negative"));
        }
        if !(pp.iqr_multiplier > 0.0 && pp.iqr_multiplier.is_finite()) {
            return Err(invalid("preprocess.iqr_multiplier", "must be finite and positive"));
        }
        self.train
            .validate()
            .map_err(|e| CliError::Config(format!("train.{e}")))?;
        let dg = &self.diagnostics;
        if !(dg.ci_level > 0.0 && dg.ci_level < 1.0) {
            return Err(invalid("diagnostics.ci_level", "must be in (0, 1)"));
        }
        if dg.min_size == 0 {
            return Err(invalid("diagnostics.min_size", "must be at least 1"));
        }
        if dg.n_clusters == 0 {
            return Err(invalid("diagnostics.n_clusters", "must be at least 1"));
        }
        if dg.top_k == 0 {
            return Err(invalid("diagnostics.top_k", "must be at least 1"));
        }
        let b = &self.benchmarks;
        if b.screening_sweep.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(invalid("benchmarks.screening_sweep", "thresholds must be positive"));
        }
        if !b.backward_threshold.is_finite() || !b.forward_threshold.is_finite() {
            return Err(invalid("benchmarks", "stepwise thresholds must be finite"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("seeds", "seeds must be distinct"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(invalid("output_dir", "must not be empty"));
        }
        Ok(())
    }
}
