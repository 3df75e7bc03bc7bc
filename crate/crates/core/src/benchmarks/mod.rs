//! Comparison arms: PCA latent space, reconstruction-only autoencoder and
//! stepwise regression on the original predictors.

mod stepwise;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use stepwise::{
    backward_eliminate, forward_interactions, stepwise, univariate_screen, StepAction,
    StepwiseConfig, StepwiseModel, TraceStep, SCREENING_SWEEP,
};

use crate::dataio::Dataset;
use crate::diagnostics::fit_global;
use crate::numstat::pca;
use crate::training::{train, TrainConfig, TrainedModel};
use crate::{Parallelism, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkMethod {
    Pca,
    PlainAe,
    Proposed,
}

impl BenchmarkMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkMethod::Pca => "pca",
            BenchmarkMethod::PlainAe => "plain_ae",
            BenchmarkMethod::Proposed => "proposed",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub method: BenchmarkMethod,
    pub r_squared: f64,
    pub latent: Array2<f64>,
    pub notes: String,
}

/// Global OLS on the first `d` principal component scores.
pub fn pca_baseline(train_data: &Dataset, d: usize) -> Result<BenchmarkResult> {
    let p = pca(train_data.x.view(), d)?;
    let global = fit_global(p.scores.view(), train_data.y.view(), 0.95)?;
    let explained: f64 = p.explained_variance.sum();
    Ok(BenchmarkResult {
        method: BenchmarkMethod::Pca,
        r_squared: global.ols.r_squared,
        latent: p.scores,
        notes: format!("explained variance of {d} components: {explained:.4}"),
    })
}

fn latent_result(
    method: BenchmarkMethod,
    model: &TrainedModel,
    train_data: &Dataset,
    test_data: Option<&Dataset>,
) -> Result<BenchmarkResult> {
    let latent = model.encode(train_data.x.view())?;
    let global = fit_global(latent.view(), train_data.y.view(), 0.95)?;
    let mut notes = format!(
        "train reconstruction loss {:.6}",
        model.reconstruction_loss(train_data.x.view())?
    );
    if let Some(t) = test_data.filter(|t| t.n() > 0) {
        notes.push_str(&format!(
            "; test reconstruction loss {:.6}",
            model.reconstruction_loss(t.x.view())?
        ));
    }
    Ok(BenchmarkResult {
        method,
        r_squared: global.ols.r_squared,
        latent,
        notes,
    })
}

/// The same architecture, seed and schedule trained on reconstruction alone.
pub fn plain_ae_baseline(
    train_data: &Dataset,
    test_data: Option<&Dataset>,
    cfg: &TrainConfig,
    par: Parallelism,
) -> Result<(BenchmarkResult, TrainedModel)> {
    let model = train(train_data, &cfg.reconstruction_only(), par)?;
    let result = latent_result(BenchmarkMethod::PlainAe, &model, train_data, test_data)?;
    Ok((result, model))
}

pub fn proposed_result(
    model: &TrainedModel,
    train_data: &Dataset,
    test_data: Option<&Dataset>,
) -> Result<BenchmarkResult> {
    latent_result(BenchmarkMethod::Proposed, model, train_data, test_data)
}

pub fn benchmarks_csv(results: &[BenchmarkResult]) -> String {
    let mut out = String::from("method,r_squared,notes\n");
    for r in results {
        out.push_str(&format!(
            "{},{},\"{}\"\n",
            r.method.as_str(),
            r.r_squared,
            r.notes.replace('"', "\"\"")
        ));
    }
    out
}
