use std::collections::BTreeMap;

use ndarray::{s, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::global::{DeviationRecord, Direction, GlobalLatentModel};
use crate::numstat::{ols_fit, ClusterAssignment};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseContrast {
    pub rmse_global_in: f64,
    pub rmse_local_in: f64,
    pub rmse_global_out: f64,
    pub rmse_local_out: f64,
}

impl RmseContrast {
    pub fn improvement_in(&self) -> f64 {
        self.rmse_global_in - self.rmse_local_in
    }

    pub fn improvement_out(&self) -> f64 {
        self.rmse_global_out - self.rmse_local_out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTest {
    pub predictor: String,
    pub coefficient: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreProfile {
    /// Mean standardized value of each predictor over the members.
    pub per_predictor: Vec<f64>,
    /// `per_predictor` averaged within each predictor cluster.
    pub per_cluster: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub members: Vec<usize>,
    pub dim: usize,
    pub direction: Direction,
    pub zscore_profile: Option<ZScoreProfile>,
    pub rmse: Option<RmseContrast>,
    pub interaction_tests: Vec<InteractionTest>,
}

impl SubgroupReport {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// One subgroup per (dimension, direction) with at least `min_size` flagged
/// subjects, largest first. A subject flagged on several dimensions belongs
/// to each corresponding subgroup.
pub fn form_subgroups(records: &[DeviationRecord], min_size: usize) -> Vec<SubgroupReport> {
    let mut groups: BTreeMap<(usize, Direction), Vec<usize>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.flagged) {
        if let Some(dir) = r.direction {
            groups.entry((r.dim, dir)).or_default().push(r.patient);
        }
    }
    let mut out: Vec<SubgroupReport> = groups
        .into_iter()
        .filter(|(_, m)| m.len() >= min_size.max(1))
        .map(|((dim, direction), mut members)| {
            members.sort_unstable();
            members.dedup();
            SubgroupReport {
                members,
                dim,
                direction,
                zscore_profile: None,
                rmse: None,
                interaction_tests: Vec::new(),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.size()
            .cmp(&a.size())
            .then(a.dim.cmp(&b.dim))
            .then(a.direction.cmp(&b.direction))
    });
    out
}

/// Member means of each standardized predictor, then averaged per cluster.
pub fn zscore_profile(
    x_std: ArrayView2<f64>,
    members: &[usize],
    clusters: &ClusterAssignment,
) -> Result<ZScoreProfile> {
    if members.is_empty() {
        return Err(Error::config("members", "empty member set"));
    }
    if clusters.labels.len() != x_std.ncols() {
        return Err(Error::Shape("cluster labels do not match predictors".into()));
    }
    let sub = x_std.select(Axis(0), members);
    let per_predictor = sub.mean_axis(Axis(0)).expect("nonempty").to_vec();
    let per_cluster = (0..clusters.n_clusters)
        .map(|c| {
            let idx = clusters.members(c);
            idx.iter().map(|&j| per_predictor[j]).sum::<f64>() / idx.len() as f64
        })
        .collect();
    Ok(ZScoreProfile {
        per_predictor,
        per_cluster,
    })
}

fn rmse(sq: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in sq {
        sum += v;
        count += 1;
    }
    (sum / count as f64).sqrt()
}

/// RMSE of the global and local predictions inside and outside `members`.
pub fn rmse_contrast(
    z: ArrayView2<f64>,
    y: ArrayView1<f64>,
    local_coefficients: ArrayView2<f64>,
    global: &GlobalLatentModel,
    members: &[usize],
) -> Result<RmseContrast> {
    let n = z.nrows();
    let mut inside = vec![false; n];
    for &m in members {
        if m >= n {
            return Err(Error::Shape(format!("member {m} out of range")));
        }
        inside[m] = true;
    }
    let n_in = inside.iter().filter(|&&b| b).count();
    if n_in == 0 || n_in == n {
        return Err(Error::config("members", "need members and non-members"));
    }
    let sq = |i: usize| {
        let zi = z.row(i);
        let g = y[i] - global.predict_row(zi);
        let b = local_coefficients.row(i);
        let l = y[i] - (b[0] + zi.dot(&b.slice(s![1..])));
        (g * g, l * l)
    };
    let errs: Vec<(f64, f64)> = (0..n).map(sq).collect();
    let pick = |want: bool, local: bool| {
        rmse(
            errs.iter()
                .zip(&inside)
                .filter(|(_, &m)| m == want)
                .map(|(e, _)| if local { e.1 } else { e.0 }),
        )
    };
    Ok(RmseContrast {
        rmse_global_in: pick(true, false),
        rmse_local_in: pick(true, true),
        rmse_global_out: pick(false, false),
        rmse_local_out: pick(false, true),
    })
}

/// For each predictor `x`: OLS of `y` on `[1, x, g, x·g]` with `g` the
/// membership indicator; reports the `x·g` coefficient and its p-value.
pub fn interaction_check(
    x_std: ArrayView2<f64>,
    y: ArrayView1<f64>,
    names: &[String],
    members: &[usize],
    predictors: &[usize],
) -> Result<Vec<InteractionTest>> {
    let n = x_std.nrows();
    let mut g = vec![0.0; n];
    for &m in members {
        g[m] = 1.0;
    }
    let n_in = g.iter().filter(|&&v| v == 1.0).count();
    if n_in < 2 || n - n_in < 2 {
        return Err(Error::config(
            "members",
            "interaction check needs at least two members and two non-members",
        ));
    }
    predictors
        .iter()
        .map(|&j| {
            let design = ndarray::Array2::from_shape_fn((n, 3), |(i, c)| match c {
                0 => x_std[[i, j]],
                1 => g[i],
                _ => x_std[[i, j]] * g[i],
            });
            let fit = ols_fit(design.view(), y, 0.05).map_err(|e| match e {
                Error::Singular(m) => Error::Singular(format!("interaction design for {}: {m}", names[j])),
                other => other,
            })?;
            Ok(InteractionTest {
                predictor: names[j].clone(),
                coefficient: fit.coefficients[3],
                p_value: fit.p_values[3],
            })
        })
        .collect()
}
