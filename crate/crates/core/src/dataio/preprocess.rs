use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::table::RawTable;
use crate::{Error, Result};

/// Keeps predictors whose sample variance exceeds `threshold`. The outcome
/// column is always kept.
pub fn variance_filter(table: &RawTable, threshold: f64) -> Result<RawTable> {
    if table.n_rows() == 0 {
        return Err(Error::NoUsableRows);
    }
    let y = table.outcome_index();
    let keep: Vec<usize> = (0..table.column_names.len())
        .filter(|&j| j == y || sample_variance(table.values.column(j)) > threshold)
        .collect();
    if keep.len() == 1 {
        return Err(Error::AllPredictorsFiltered);
    }
    Ok(table.select_columns(&keep))
}

fn sample_variance(col: ArrayView1<f64>) -> f64 {
    let n = col.len();
    if n < 2 {
        return 0.0;
    }
    col.var(1.0)
}

/// Quantile with linear interpolation between order statistics
/// (position `(n − 1)·q` in the sorted sample).
pub fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-column `[Q1 − m·IQR, Q3 + m·IQR]` fences.
pub fn iqr_fences(col: ArrayView1<f64>, multiplier: f64) -> (f64, f64) {
    let mut sorted = col.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_linear(&sorted, 0.25);
    let q3 = quantile_linear(&sorted, 0.75);
    let iqr = q3 - q1;
    (q1 - multiplier * iqr, q3 + multiplier * iqr)
}

/// Drops every row with a value outside its column's IQR fences (all columns,
/// outcome included). Returns the surviving table and the number of rows dropped.
pub fn outlier_filter(table: &RawTable, multiplier: f64) -> Result<(RawTable, usize)> {
    let n = table.n_rows();
    if n < 4 {
        return Err(Error::TooFewRows(format!(
            "quartiles need at least 4 rows, got {n}"
        )));
    }
    let fences: Vec<(f64, f64)> = table
        .values
        .columns()
        .into_iter()
        .map(|c| iqr_fences(c, multiplier))
        .collect();
    let keep: Vec<usize> = (0..n)
        .filter(|&i| {
            table
                .values
                .row(i)
                .iter()
                .zip(&fences)
                .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
        })
        .collect();
    if keep.len() < 2 {
        return Err(Error::TooFewRows(format!(
            "only {} rows survive outlier removal",
            keep.len()
        )));
    }
    let dropped = n - keep.len();
    Ok((table.select_rows(&keep), dropped))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Per-column location and scale (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub predictor_means: Array1<f64>,
    pub predictor_sds: Array1<f64>,
    pub outcome_mean: f64,
    pub outcome_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub names: Vec<String>,
    pub standardization: Standardization,
    /// Subgroup id per subject (0 = none), synthetic cohorts only.
    pub truth_labels: Option<Vec<usize>>,
    pub row_ids: Vec<usize>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(Axis(0), rows),
            names: self.names.clone(),
            standardization: self.standardization.clone(),
            truth_labels: self
                .truth_labels
                .as_ref()
                .map(|t| rows.iter().map(|&i| t[i]).collect()),
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }
}

fn mean_and_population_sd(col: ArrayView1<f64>) -> (f64, f64) {
    let mean = col.mean().unwrap_or(0.0);
    (mean, col.var(0.0).sqrt())
}

/// Seeded shuffle split; standardization statistics come from the train split
/// and are applied to both splits.
///
/// `labels` optionally carries synthetic subgroup ids indexed by row id.
pub fn split_standardize(
    table: &RawTable,
    spec: SplitSpec,
    labels: Option<&[usize]>,
) -> Result<(Dataset, Dataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0) {
        return Err(Error::config(
            "train_fraction",
            format!("{} not in (0, 1]", spec.train_fraction),
        ));
    }
    let n = table.n_rows();
    let n_train = ((spec.train_fraction * n as f64) + 1e-9).floor() as usize;
    if n_train < 2 {
        return Err(Error::TooFewRows(format!("train split has {n_train} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (train_rows, test_rows) = order.split_at(n_train);
    let train = table.select_rows(train_rows);
    let test = table.select_rows(test_rows);

    let predictors = table.predictor_indices();
    let y_idx = table.outcome_index();
    let mut means = Array1::zeros(predictors.len());
    let mut sds = Array1::zeros(predictors.len());
    for (k, &j) in predictors.iter().enumerate() {
        let (m, s) = mean_and_population_sd(train.values.column(j));
        if !(s > 0.0) {
            return Err(Error::DegenerateColumn(table.column_names[j].clone()));
        }
        means[k] = m;
        sds[k] = s;
    }
    let (ym, ys) = mean_and_population_sd(train.values.column(y_idx));
    if !(ys > 0.0) {
        return Err(Error::DegenerateColumn(table.outcome_column.clone()));
    }
    let standardization = Standardization {
        predictor_means: means,
        predictor_sds: sds,
        outcome_mean: ym,
        outcome_sd: ys,
    };
    let names = table.predictor_names();
    let make = |part: &RawTable| {
        let x = part.values.select(Axis(1), &predictors);
        let x = (&x - &standardization.predictor_means) / &standardization.predictor_sds;
        let y = part
            .values
            .column(y_idx)
            .mapv(|v| (v - standardization.outcome_mean) / standardization.outcome_sd);
        Dataset {
            x,
            y,
            names: names.clone(),
            standardization: standardization.clone(),
            truth_labels: labels.map(|l| part.row_ids.iter().map(|&r| l[r]).collect()),
            row_ids: part.row_ids.clone(),
        }
    };
    Ok((make(&train), make(&test)))
}

/// Thresholds for the preprocessing pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub variance_filter: bool,
    pub variance_threshold: f64,
    pub outlier_filter: bool,
    pub iqr_multiplier: f64,
    pub train_fraction: f64,
    pub split_seed: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            variance_filter: true,
            variance_threshold: 0.2,
            outlier_filter: true,
            iqr_multiplier: 4.0,
            train_fraction: 0.8,
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub rows_in: usize,
    pub predictors_in: usize,
    pub predictors_kept: usize,
    pub outlier_rows_dropped: usize,
    pub outlier_row_ids: Vec<usize>,
    pub n_train: usize,
    pub n_test: usize,
}

/// Variance filter, then outlier removal, then split and standardize.
pub fn preprocess(
    table: &RawTable,
    cfg: &PreprocessConfig,
    labels: Option<&[usize]>,
) -> Result<(Dataset, Dataset, PreprocessReport)> {
    let predictors_in = table.column_names.len() - 1;
    let filtered = if cfg.variance_filter {
        variance_filter(table, cfg.variance_threshold)?
    } else {
        table.clone()
    };
    let (cleaned, dropped) = if cfg.outlier_filter {
        outlier_filter(&filtered, cfg.iqr_multiplier)?
    } else {
        (filtered.clone(), 0)
    };
    let outlier_row_ids: Vec<usize> = filtered
        .row_ids
        .iter()
        .copied()
        .filter(|r| !cleaned.row_ids.contains(r))
        .collect();
    let (train, test) = split_standardize(
        &cleaned,
        SplitSpec {
            train_fraction: cfg.train_fraction,
            seed: cfg.split_seed,
        },
        labels,
    )?;
    let report = PreprocessReport {
        rows_in: table.n_rows(),
        predictors_in,
        predictors_kept: cleaned.column_names.len() - 1,
        outlier_rows_dropped: dropped,
        outlier_row_ids,
        n_train: train.n(),
        n_test: test.n(),
    };
    Ok((train, test, report))
}
