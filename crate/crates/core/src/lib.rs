//! Global versus localized regression in a learned latent space.
//!
//! An autoencoder maps standardized predictors into a low-dimensional latent
//! space. A single global OLS model and one kernel-weighted local model per
//! subject are fitted there; subjects whose local slopes fall outside the
//! global confidence interval are flagged and grouped into subgroups.
//!
//! Module map:
//! - [`dataio`]: CSV ingest, preprocessing filters, split/standardize, synthetic cohorts
//! - [`numstat`]: OLS/WLS, PCA, Welch t-tests, correlation, predictor clustering
//! - [`neural`]: tanh MLPs, backpropagation, Adam
//! - [`localreg`]: adaptive Gaussian kernel weights, per-subject local fits and their gradients
//! - [`training`]: composite loss, the epoch loop, multi-seed studies
//! - [`diagnostics`]: global model, deviations, subgroups, naming, projection, rank stability
//! - [`benchmarks`]: PCA, reconstruction-only autoencoder, stepwise regression

pub mod benchmarks;
pub mod dataio;
pub mod diagnostics;
mod error;
pub mod linalg;
pub mod localreg;
pub mod neural;
pub mod numstat;
pub mod parallel;
pub mod training;

pub use error::{Error, Result};
pub use parallel::Parallelism;
