use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::global::{deviations_from_coefficients, fit_global};
use crate::numstat::pearson_corr;
use crate::training::{SeedStudy, TrainedModel};
use crate::{Error, Result};

/// Alignment correlations below this mark a dimension as an unstable construct.
pub const UNSTABLE_CORRELATION: f64 = 0.2;

/// Latent scores and per-dimension deltas of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDeviations {
    pub latent: Array2<f64>,
    pub deltas: Array2<f64>,
}

impl RunDeviations {
    pub fn from_model(model: &TrainedModel, y: ArrayView1<f64>, ci_level: f64) -> Result<Self> {
        let bundle = &model.final_bundle;
        let global = fit_global(bundle.z.view(), y, ci_level)?;
        let records = deviations_from_coefficients(bundle.coefficients.view(), &global)?;
        let mut deltas = Array2::<f64>::zeros((bundle.n(), bundle.d()));
        for r in records {
            deltas[[r.patient, r.dim]] = r.delta;
        }
        Ok(RunDeviations {
            latent: bundle.z.clone(),
            deltas,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimAlignment {
    /// `mapping[k]` is the dimension of this run matched to reference dim `k`.
    pub mapping: Vec<usize>,
    pub signs: Vec<f64>,
    /// `|corr|` of each matched pair.
    pub correlations: Vec<f64>,
    pub unstable: Vec<bool>,
}

/// Greedy matching on `|corr|`: the largest remaining pair is fixed first,
/// ties going to the lower (reference, other) index pair.
pub fn align_dims(reference: ArrayView2<f64>, other: ArrayView2<f64>) -> Result<DimAlignment> {
    let d = reference.ncols();
    if other.dim() != reference.dim() {
        return Err(Error::Shape("runs have different latent shapes".into()));
    }
    let mut corr = Array2::<f64>::zeros((d, d));
    for a in 0..d {
        for b in 0..d {
            // a constant column cannot be matched by correlation
            corr[[a, b]] = pearson_corr(reference.column(a), other.column(b)).unwrap_or(0.0);
        }
    }
    let mut mapping = vec![usize::MAX; d];
    let mut used = vec![false; d];
    for _ in 0..d {
        let mut best: Option<(usize, usize)> = None;
        for a in (0..d).filter(|&a| mapping[a] == usize::MAX) {
            for b in (0..d).filter(|&b| !used[b]) {
                let better = match best {
                    None => true,
                    Some((ba, bb)) => corr[[a, b]].abs() > corr[[ba, bb]].abs(),
                };
                if better {
                    best = Some((a, b));
                }
            }
        }
        let (a, b) = best.expect("unmatched dimension remains");
        mapping[a] = b;
        used[b] = true;
    }
    let signs: Vec<f64> = (0..d)
        .map(|a| if corr[[a, mapping[a]]] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let correlations: Vec<f64> = (0..d).map(|a| corr[[a, mapping[a]]].abs()).collect();
    let unstable = correlations.iter().map(|&c| c < UNSTABLE_CORRELATION).collect();
    Ok(DimAlignment {
        mapping,
        signs,
        correlations,
        unstable,
    })
}

/// Rank of each subject by `|delta|`, 1 for the largest; ties by index.
pub fn deviation_ranks(deltas: ArrayView1<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[b].abs().total_cmp(&deltas[a].abs()).then(a.cmp(&b)));
    let mut ranks = vec![0; deltas.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub reference: usize,
    pub alignments: Vec<DimAlignment>,
    /// Per-run ranks on the reference dimensions (`n × d`).
    pub ranks: Vec<Array2<usize>>,
    /// Population SD of each subject's rank across runs (`n × d`).
    pub rank_sd: Array2<f64>,
    pub mean_rank_sd: Vec<f64>,
    /// Reference dimensions poorly matched in at least one run.
    pub unstable_dims: Vec<usize>,
}

pub fn rank_stability(runs: &[RunDeviations], reference: usize) -> Result<StabilityTable> {
    if runs.len() < 2 {
        return Err(Error::config("seeds", "rank stability needs at least two runs"));
    }
    if reference >= runs.len() {
        return Err(Error::config("reference", "reference run out of range"));
    }
    let r0 = &runs[reference];
    let (n, d) = r0.deltas.dim();
    let mut alignments = Vec::with_capacity(runs.len());
    let mut ranks = Vec::with_capacity(runs.len());
    for run in runs {
        if run.deltas.dim() != (n, d) {
            return Err(Error::Shape("runs have different deviation shapes".into()));
        }
        let al = align_dims(r0.latent.view(), run.latent.view())?;
        let mut rk = Array2::<usize>::zeros((n, d));
        for k in 0..d {
            let col = deviation_ranks(run.deltas.column(al.mapping[k]));
            for (i, r) in col.into_iter().enumerate() {
                rk[[i, k]] = r;
            }
        }
        alignments.push(al);
        ranks.push(rk);
    }
    let m = runs.len() as f64;
    let rank_sd = Array2::from_shape_fn((n, d), |(i, k)| {
        let vals: Vec<f64> = ranks.iter().map(|r| r[[i, k]] as f64).collect();
        let mean = vals.iter().sum::<f64>() / m;
        (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m).sqrt()
    });
    let mean_rank_sd = (0..d).map(|k| rank_sd.column(k).mean().unwrap_or(0.0)).collect();
    let unstable_dims = (0..d)
        .filter(|&k| alignments.iter().any(|a| a.unstable[k]))
        .collect();
    Ok(StabilityTable {
        reference,
        alignments,
        ranks,
        rank_sd,
        mean_rank_sd,
        unstable_dims,
    })
}

/// Rank stability over the successful runs of a seed study. `reference`
/// indexes `study.runs`; the study's representative run is used when `None`.
pub fn rank_stability_for_study(
    study: &SeedStudy,
    y: ArrayView1<f64>,
    ci_level: f64,
    reference: Option<usize>,
) -> Result<StabilityTable> {
    let reference = reference
        .or(study.representative)
        .ok_or_else(|| Error::config("seeds", "no successful run"))?;
    if study.model(reference).is_none() {
        return Err(Error::config("reference", "reference run failed"));
    }
    let mut runs = Vec::new();
    let mut ref_pos = 0;
    for (i, _) in study.runs.iter().enumerate() {
        if let Some(m) = study.model(i) {
            if i == reference {
                ref_pos = runs.len();
            }
            runs.push(RunDeviations::from_model(m, y, ci_level)?);
        }
    }
    rank_stability(&runs, ref_pos)
}

impl StabilityTable {
    pub fn to_csv(&self) -> String {
        let (n, d) = self.rank_sd.dim();
        let mut out = String::from("patient,dim,rank_sd,unstable\n");
        for i in 0..n {
            for k in 0..d {
                out.push_str(&format!(
                    "{i},{k},{},{}\n",
                    self.rank_sd[[i, k]],
                    self.unstable_dims.contains(&k)
                ));
            }
        }
        out
    }
}
