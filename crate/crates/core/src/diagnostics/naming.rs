use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataio::quantile_linear;
use crate::numstat::welch_t_test;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedVariable {
    pub variable: String,
    pub t: f64,
    pub p_value: f64,
}

impl NamedVariable {
    pub fn label(&self) -> String {
        format!("{} (t={:.2})", self.variable, self.t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDimensionName {
    pub dim: usize,
    pub top: Vec<NamedVariable>,
    /// Variables constant in both halves, left out of the ranking.
    pub skipped: Vec<String>,
}

/// Ranks the original variables for each latent dimension by Welch `t`
/// between subjects above and at-or-below the dimension's median.
/// `t > 0` means the variable is higher in the upper half.
pub fn name_latent_dims(
    z: ArrayView2<f64>,
    x_std: ArrayView2<f64>,
    names: &[String],
    top_k: usize,
) -> Result<Vec<LatentDimensionName>> {
    let n = z.nrows();
    if n < 4 {
        return Err(Error::TooFewRows(format!("latent naming needs n >= 4, got {n}")));
    }
    if x_std.nrows() != n || names.len() != x_std.ncols() {
        return Err(Error::Shape("latent naming: inconsistent inputs".into()));
    }
    let mut out = Vec::with_capacity(z.ncols());
    for (dim, col) in z.columns().into_iter().enumerate() {
        let mut sorted = col.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = quantile_linear(&sorted, 0.5);
        let upper: Vec<usize> = (0..n).filter(|&i| col[i] > median).collect();
        let lower: Vec<usize> = (0..n).filter(|&i| col[i] <= median).collect();
        let mut ranked = Vec::new();
        let mut skipped = Vec::new();
        for (j, name) in names.iter().enumerate() {
            let v = x_std.column(j);
            let a = v.select(Axis(0), &upper);
            let b = v.select(Axis(0), &lower);
            let constant = |s: &ndarray::Array1<f64>| s.iter().all(|&x| x == s[0]);
            if upper.len() < 2 || lower.len() < 2 || (constant(&a) && constant(&b)) {
                skipped.push(name.clone());
                continue;
            }
            let t = welch_t_test(a.view(), b.view())?;
            ranked.push(NamedVariable {
                variable: name.clone(),
                t: t.t_statistic,
                p_value: t.p_value,
            });
        }
        ranked.sort_by(|a, b| b.t.abs().total_cmp(&a.t.abs()));
        ranked.truncate(top_k);
        out.push(LatentDimensionName {
            dim,
            top: ranked,
            skipped,
        });
    }
    Ok(out)
}

pub fn latent_names_csv(dims: &[LatentDimensionName]) -> String {
    let mut out = String::from("dim,rank,variable,t,p_value,label\n");
    for d in dims {
        for (r, v) in d.top.iter().enumerate() {
            out.push_str(&format!(
                "{},{},\"{}\",{},{},\"{}\"\n",
                d.dim,
                r + 1,
                v.variable.replace('"', "\"\""),
                v.t,
                v.p_value,
                v.label().replace('"', "\"\"")
            ));
        }
    }
    out
}
