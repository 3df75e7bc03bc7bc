use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaResult {
    /// `n_components × p`, orthonormal rows.
    pub components: Array2<f64>,
    /// `n × n_components`.
    pub scores: Array2<f64>,
    /// Sample variance of each score column, nonincreasing.
    pub explained_variance: Array1<f64>,
    pub column_means: Array1<f64>,
}

impl PcaResult {
    /// Scores for new rows, centered with the fitting means.
    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let centered = &x - &self.column_means;
        centered.dot(&self.components.t())
    }
}

/// Principal components from the SVD of the column-centered matrix. Each
/// component is signed so that its largest-magnitude loading is positive.
pub fn pca(x: ArrayView2<f64>, n_components: usize) -> Result<PcaResult> {
    let (n, p) = x.dim();
    if n_components == 0 || n_components > n.min(p) {
        return Err(Error::config(
            "n_components",
            format!("{n_components} not in 1..={}", n.min(p)),
        ));
    }
    if n < 2 {
        return Err(Error::TooFewRows("pca needs two rows".into()));
    }
    let column_means = x.mean_axis(Axis(0)).expect("nonempty");
    let centered = &x - &column_means;
    let m = DMatrix::from_fn(n, p, |i, j| centered[[i, j]]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut components = Array2::<f64>::zeros((n_components, p));
    let mut explained_variance = Array1::<f64>::zeros(n_components);
    for (c, &k) in order.iter().take(n_components).enumerate() {
        let mut row: Vec<f64> = (0..p).map(|j| v_t[(k, j)]).collect();
        let lead = row
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |(bi, bv), (i, v)| {
                if v.abs() > bv.abs() {
                    (i, *v)
                } else {
                    (bi, bv)
                }
            })
            .0;
        if row[lead] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        for (j, v) in row.into_iter().enumerate() {
            components[[c, j]] = v;
        }
        let s = svd.singular_values[k];
        explained_variance[c] = s * s / (n as f64 - 1.0);
    }
    let scores = centered.dot(&components.t());
    Ok(PcaResult {
        components,
        scores,
        explained_variance,
        column_means,
    })
}
