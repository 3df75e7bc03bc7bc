//! Synthetic cohorts with block-structured latent factors and planted
//! local-effect subgroups.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::table::RawTable;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSubgroup {
    pub size: usize,
    pub affected_factor: usize,
    pub slope_delta: f64,
    /// Offset added to the members' affected factor.
    #[serde(default)]
    pub factor_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub p: usize,
    pub d_true: usize,
    pub noise_sd: f64,
    #[serde(default)]
    pub subgroups: Vec<PlantedSubgroup>,
    pub seed: u64,
    /// Loading scale per factor (default 1 for every factor).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_strengths: Option<Vec<f64>>,
    /// Outcome weights on the factors (default: seeded draws in ±[0.5, 1]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_weights: Option<Vec<f64>>,
    /// Outcome noise; defaults to `noise_sd`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome_noise_sd: Option<f64>,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("n", "must be at least 2"));
        }
        if self.d_true == 0 {
            return Err(Error::config("d_true", "must be positive"));
        }
        if self.p < self.d_true {
            return Err(Error::config("p", "must be at least d_true"));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::config("noise_sd", "must be non-negative"));
        }
        let total: usize = self.subgroups.iter().map(|s| s.size).sum();
        if total > self.n {
            return Err(Error::config(
                "subgroups.size",
                format!("subgroup sizes sum to {total} > n = {}", self.n),
            ));
        }
        for (g, s) in self.subgroups.iter().enumerate() {
            if s.affected_factor >= self.d_true {
                return Err(Error::config(
                    format!("subgroups[{g}].affected_factor"),
                    format!("{} >= d_true = {}", s.affected_factor, self.d_true),
                ));
            }
            if !s.factor_shift.is_finite() || !s.slope_delta.is_finite() {
                return Err(Error::config(
                    format!("subgroups[{g}]"),
                    "slope_delta and factor_shift must be finite",
                ));
            }
            if s.size > self.n / 2 {
                return Err(Error::config(
                    format!("subgroups[{g}].size"),
                    "must fit inside half of the cohort",
                ));
            }
        }
        if let Some(f) = &self.factor_strengths {
            if f.len() != self.d_true {
                return Err(Error::config("factor_strengths", "length must equal d_true"));
            }
        }
        if let Some(g) = &self.outcome_weights {
            if g.len() != self.d_true {
                return Err(Error::config("outcome_weights", "length must equal d_true"));
            }
        }
        if let Some(s) = self.outcome_noise_sd {
            if !(s >= 0.0) {
                return Err(Error::config("outcome_noise_sd", "must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCohort {
    pub table: RawTable,
    /// Subgroup id per row (0 = none, g + 1 for `subgroups[g]`).
    pub truth_labels: Vec<usize>,
    pub factors: Array2<f64>,
    pub loadings: Array2<f64>,
    pub outcome_weights: Array1<f64>,
    /// Predictor indices loading on each factor.
    pub blocks: Vec<Vec<usize>>,
    /// Center subject of each planted subgroup.
    pub centers: Vec<usize>,
}

impl SyntheticCohort {
    pub fn members(&self, subgroup: usize) -> Vec<usize> {
        self.truth_labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == subgroup + 1)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Predictor `j` belongs to block `j · d / p`.
pub fn factor_blocks(p: usize, d: usize) -> Vec<Vec<usize>> {
    let mut blocks = vec![Vec::new(); d];
    for j in 0..p {
        blocks[j * d / p].push(j);
    }
    blocks
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `X = U·L + noise`, `y = U·γ + Σ_g [i ∈ g]·δ_g·(U[:, f_g] − s_g) + noise`.
///
/// Each subgroup is the `size` unassigned subjects nearest to a seeded center
/// subject, with distance measured over the factors other than the affected
/// one: members share a position in the remaining factors and span the full
/// range of the factor whose slope they change. Members' affected factor is
/// then moved by `factor_shift` (`s_g`), which leaves the slope change centred.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticCohort> {
    cfg.validate()?;
    let (n, p, d) = (cfg.n, cfg.p, cfg.d_true);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut factors = Array2::from_shape_fn((n, d), |_| normal(&mut rng));
    let blocks = factor_blocks(p, d);
    let strengths = cfg
        .factor_strengths
        .clone()
        .unwrap_or_else(|| vec![1.0; d]);
    let mut loadings = Array2::<f64>::zeros((d, p));
    for (f, block) in blocks.iter().enumerate() {
        for &j in block {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            loadings[[f, j]] = sign * strengths[f] * rng.random_range(0.5..1.0);
        }
    }
    let outcome_weights: Array1<f64> = match &cfg.outcome_weights {
        Some(g) => Array1::from(g.clone()),
        None => Array1::from_shape_fn(d, |_| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            sign * rng.random_range(0.5..1.0)
        }),
    };

    let mut truth_labels = vec![0usize; n];
    let mut centers = Vec::with_capacity(cfg.subgroups.len());
    for (g, sub) in cfg.subgroups.iter().enumerate() {
        let free: Vec<usize> = (0..n).filter(|&i| truth_labels[i] == 0).collect();
        if free.len() < sub.size {
            return Err(Error::config(
                format!("subgroups[{g}].size"),
                format!("only {} unassigned subjects remain", free.len()),
            ));
        }
        let center = free[rng.random_range(0..free.len())];
        let mut nearest: Vec<(usize, f64)> = free
            .iter()
            .map(|&i| {
                let dist: f64 = (0..d)
                    .filter(|&k| k != sub.affected_factor || d == 1)
                    .map(|k| (factors[[i, k]] - factors[[center, k]]).powi(2))
                    .sum();
                (i, dist)
            })
            .collect();
        nearest.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for &(i, _) in nearest.iter().take(sub.size) {
            truth_labels[i] = g + 1;
        }
        centers.push(center);
    }
    for i in 0..n {
        if truth_labels[i] > 0 {
            let sub = &cfg.subgroups[truth_labels[i] - 1];
            factors[[i, sub.affected_factor]] += sub.factor_shift;
        }
    }

    let mut values = factors.dot(&loadings);
    if cfg.noise_sd > 0.0 {
        values.mapv_inplace(|v| v + cfg.noise_sd * normal(&mut rng));
    }
    let outcome_noise = cfg.outcome_noise_sd.unwrap_or(cfg.noise_sd);
    let mut y = factors.dot(&outcome_weights);
    for i in 0..n {
        if truth_labels[i] > 0 {
            let sub = &cfg.subgroups[truth_labels[i] - 1];
            y[i] += sub.slope_delta * (factors[[i, sub.affected_factor]] - sub.factor_shift);
        }
        if outcome_noise > 0.0 {
            y[i] += outcome_noise * normal(&mut rng);
        }
    }

    let mut full = Array2::<f64>::zeros((n, p + 1));
    full.slice_mut(ndarray::s![.., ..p]).assign(&values);
    full.column_mut(p).assign(&y);
    let width = p.to_string().len().max(3);
    let mut names: Vec<String> = (0..p).map(|j| format!("x{:0width$}", j + 1)).collect();
    names.push("y".to_string());
    let table = RawTable::new(full, names, "y")?;
    Ok(SyntheticCohort {
        table,
        truth_labels,
        factors,
        loadings,
        outcome_weights,
        blocks,
        centers,
    })
}

/// Sidecar for a written synthetic table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub seed: u64,
    pub config: SynthConfig,
    /// Row indices of each planted subgroup.
    pub truth_label_indices: Vec<Vec<usize>>,
}

impl SyntheticCohort {
    pub fn manifest(&self, cfg: &SynthConfig) -> SynthManifest {
        SynthManifest {
            seed: cfg.seed,
            config: cfg.clone(),
            truth_label_indices: (0..cfg.subgroups.len()).map(|g| self.members(g)).collect(),
        }
    }

    /// Writes `<stem>.csv` and `<stem>.truth.json` into `dir`.
    pub fn write(&self, cfg: &SynthConfig, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        self.table.write_csv(dir.join(format!("{stem}.csv")))?;
        let path = dir.join(format!("{stem}.truth.json"));
        let json = serde_json::to_string_pretty(&self.manifest(cfg))?;
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numstat::ols_fit;

    fn base(seed: u64) -> SynthConfig {
        SynthConfig {
            n: 120,
            p: 20,
            d_true: 4,
            noise_sd: 0.0,
            subgroups: vec![],
            seed,
            factor_strengths: None,
            outcome_weights: None,
            outcome_noise_sd: None,
        }
    }

    #[test]
    fn noiseless_outcome_is_linear_in_factors() {
        let c = generate_synthetic(&base(1)).unwrap();
        let y = c.table.values.column(20);
        let fit = ols_fit(c.factors.view(), y, 0.05).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.residuals.dot(&fit.residuals).sqrt() < 1e-9);
    }

    #[test]
    fn subgroup_bookkeeping() {
        let mut cfg = base(2);
        cfg.noise_sd = 0.5;
        cfg.subgroups = vec![PlantedSubgroup {
            size: 30,
            affected_factor: 1,
            slope_delta: 1.5,
            factor_shift: 0.0,
        }];
        let c = generate_synthetic(&cfg).unwrap();
        assert_eq!(c.truth_labels.iter().filter(|&&l| l == 1).count(), 30);
        let center = c.centers[0];
        let dist = |i: usize| {
            [0, 2, 3]
                .iter()
                .map(|&k| (c.factors[[i, k]] - c.factors[[center, k]]).powi(2))
                .sum::<f64>()
        };
        let members = c.members(0);
        let radius = members.iter().map(|&i| dist(i)).fold(0.0, f64::max);
        for i in (0..c.truth_labels.len()).filter(|i| !members.contains(i)) {
            assert!(dist(i) >= radius);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let mut cfg = base(3);
        cfg.noise_sd = 1.0;
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 4;
        assert_ne!(a.table.values, generate_synthetic(&cfg).unwrap().table.values);
    }

    #[test]
    fn block_loadings_are_disjoint() {
        let c = generate_synthetic(&base(5)).unwrap();
        for j in 0..20 {
            let nonzero = (0..4).filter(|&f| c.loadings[[f, j]] != 0.0).count();
            assert_eq!(nonzero, 1);
        }
        assert_eq!(c.blocks.iter().map(Vec::len).sum::<usize>(), 20);
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let mut cfg = base(1);
        cfg.subgroups = vec![PlantedSubgroup {
            size: 500,
            affected_factor: 0,
            slope_delta: 1.0,
            factor_shift: 0.0,
        }];
        let err = generate_synthetic(&cfg).unwrap_err().to_string();
        assert!(err.contains("subgroups.size"), "{err}");
        cfg.subgroups[0].size = 5;
        cfg.subgroups[0].affected_factor = 9;
        let err = generate_synthetic(&cfg).unwrap_err().to_string();
        assert!(err.contains("affected_factor"), "{err}");
    }
}
