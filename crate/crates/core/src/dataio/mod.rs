//! Tabular ingest, preprocessing (variance filter, IQR outlier rows,
//! train-split standardization) and synthetic cohorts.

mod preprocess;
mod synth;
mod table;

pub use preprocess::{
    iqr_fences, outlier_filter, preprocess, quantile_linear, split_standardize, variance_filter,
    Dataset, PreprocessConfig, PreprocessReport, SplitSpec, Standardization,
};
pub use synth::{
    factor_blocks, generate_synthetic, PlantedSubgroup, SynthConfig, SynthManifest,
    SyntheticCohort,
};
pub use table::{load_csv, RawTable};
