//! Classical statistics shared by the pipeline: OLS with inference, weighted
//! least squares, PCA, Welch t-tests, correlation, and predictor clustering.

mod cluster;
pub mod distributions;
mod pca;
mod regression;
mod hypothesis;

pub use cluster::{
    average_linkage, correlation_distance, cut_tree, hierarchical_cluster, ClusterAssignment,
    Merge,
};
pub use pca::{pca, PcaResult};
pub use regression::{
    gaussian_aic, ols_fit, weighted_mean_fit, weighted_normal_equations, weighted_rss, wls_fit,
    OlsResult, WlsResult,
};
pub use hypothesis::{pearson_corr, welch_t_test, TTestResult};
