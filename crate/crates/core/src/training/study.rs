use serde::{Deserialize, Serialize};

use super::{train, TrainConfig, TrainedModel};
use crate::dataio::Dataset;
use crate::numstat::ols_fit;
use crate::{Error, Parallelism, Result};

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub outcome: std::result::Result<TrainedModel, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub train_rec: Option<f64>,
    pub test_rec: Option<f64>,
    pub global_r2: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SeedStudy {
    pub runs: Vec<SeedRun>,
    pub metrics: Vec<RunMetrics>,
    /// Run with the median training reconstruction loss (lower median for
    /// an even count of successful runs).
    pub representative: Option<usize>,
}

impl SeedStudy {
    pub fn model(&self, run: usize) -> Option<&TrainedModel> {
        self.runs.get(run).and_then(|r| r.outcome.as_ref().ok())
    }

    pub fn representative_model(&self) -> Option<&TrainedModel> {
        self.representative.and_then(|r| self.model(r))
    }

    pub fn metrics_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("seed,train_rec,test_rec,global_r2,error\n");
        for m in &self.metrics {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                m.seed,
                fmt(m.train_rec),
                fmt(m.test_rec),
                fmt(m.global_r2),
                m.error.as_deref().unwrap_or("").replace(',', ";")
            ));
        }
        out
    }
}

fn run_metrics(
    seed: u64,
    model: &TrainedModel,
    train_data: &Dataset,
    test_data: Option<&Dataset>,
) -> Result<RunMetrics> {
    let train_rec = model.reconstruction_loss(train_data.x.view())?;
    let test_rec = match test_data {
        Some(t) if t.n() > 0 => Some(model.reconstruction_loss(t.x.view())?),
        _ => None,
    };
    let global = ols_fit(model.final_bundle.z.view(), train_data.y.view(), 0.05)?;
    Ok(RunMetrics {
        seed,
        train_rec: Some(train_rec),
        test_rec,
        global_r2: Some(global.r_squared),
        error: None,
    })
}

/// Independent training runs, one per seed. Failed runs are recorded and the
/// study continues.
pub fn seed_study(
    train_data: &Dataset,
    test_data: Option<&Dataset>,
    cfg: &TrainConfig,
    seeds: &[u64],
    par: Parallelism,
) -> Result<SeedStudy> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("seeds", "seeds must be distinct"));
    }
    cfg.validate()?;
    let results = par.map_slice(seeds, |&seed| {
        let run_cfg = TrainConfig { seed, ..*cfg };
        let outcome = train(train_data, &run_cfg, par).and_then(|m| {
            let metrics = run_metrics(seed, &m, train_data, test_data)?;
            Ok((m, metrics))
        });
        match outcome {
            Ok((m, metrics)) => (
                SeedRun {
                    seed,
                    outcome: Ok(m),
                },
                metrics,
            ),
            Err(e) => (
                SeedRun {
                    seed,
                    outcome: Err(e.to_string()),
                },
                RunMetrics {
                    seed,
                    train_rec: None,
                    test_rec: None,
                    global_r2: None,
                    error: Some(e.to_string()),
                },
            ),
        }
    });
    let (runs, metrics): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let ok: Vec<(usize, f64)> = metrics
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.train_rec.map(|r| (i, r)))
        .collect();
    let recs: Vec<f64> = ok.iter().map(|&(_, r)| r).collect();
    let representative = median_index(&recs).map(|k| ok[k].0);
    Ok(SeedStudy {
        runs,
        metrics,
        representative,
    })
}

/// Index of the median among `values` (lower median), ties by position.
pub fn median_index(values: &[f64]) -> Option<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx.get(values.len().saturating_sub(1) / 2).copied()
}

#[cfg(test)]
mod tests {
    use super::median_index;

    #[test]
    fn median_selection() {
        assert_eq!(median_index(&[0.45, 0.40, 0.41]), Some(2));
        assert_eq!(median_index(&[0.3]), Some(0));
        assert_eq!(median_index(&[]), None);
    }
}
