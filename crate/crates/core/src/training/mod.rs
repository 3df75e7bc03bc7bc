//! Composite objective and end-to-end training of the outcome-aware autoencoder.

mod loss;
mod study;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use loss::{
    composite_loss, composite_loss_and_gradient, loss_pred, loss_rec, loss_reg,
    loss_reg_gradient, LossComponents,
};
pub use study::{median_index, seed_study, RunMetrics, SeedRun, SeedStudy};

use crate::dataio::Dataset;
use crate::localreg::{local_fit_bundle, KernelConfig, LocalFitBundle};
use crate::neural::{
    adam_step, default_architecture, init_params_with_rng, AdamState, AutoencoderRecord, MlpParams,
};
use crate::{Error, Parallelism, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda_rec: f64,
    pub lambda_pred: f64,
    pub lambda_reg: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batches: usize,
    pub d: usize,
    pub kernel: KernelConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_rec: 1.0,
            lambda_pred: 0.06,
            lambda_reg: 0.3,
            epochs: 300,
            lr: 1e-4,
            batches: 1,
            d: 4,
            kernel: KernelConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_rec", self.lambda_rec),
            ("lambda_pred", self.lambda_pred),
            ("lambda_reg", self.lambda_reg),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be a finite non-negative number"));
            }
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::config("lr", "must be positive"));
        }
        if self.batches == 0 {
            return Err(Error::config("batches", "must be at least 1"));
        }
        if self.d == 0 {
            return Err(Error::config("d", "must be at least 1"));
        }
        self.kernel.validate()
    }

    /// The same run with only the reconstruction term.
    pub fn reconstruction_only(&self) -> TrainConfig {
        TrainConfig {
            lambda_pred: 0.0,
            lambda_reg: 0.0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub rec: f64,
    pub pred: f64,
    pub reg: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub encoder: MlpParams,
    pub decoder: MlpParams,
    pub config: TrainConfig,
    pub loss_history: Vec<EpochLoss>,
    pub final_bundle: LocalFitBundle,
}

/// JSON form of a trained model: networks plus the full training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModelRecord {
    pub model: AutoencoderRecord,
    pub kernel: KernelConfig,
    pub config: TrainConfig,
}

impl TrainedModel {
    pub fn encode(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.encoder.forward(x)
    }

    pub fn reconstruct(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = self.encoder.forward(x)?;
        self.decoder.forward(z.view())
    }

    pub fn reconstruction_loss(&self, x: ArrayView2<f64>) -> Result<f64> {
        Ok(loss_rec(x, self.reconstruct(x)?.view()))
    }

    pub fn record(&self) -> TrainedModelRecord {
        TrainedModelRecord {
            model: AutoencoderRecord::new(&self.encoder, &self.decoder, self.config.seed),
            kernel: self.config.kernel,
            config: self.config,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.record())? + "\n")
    }

    /// Loss history as CSV text (`epoch,rec,pred,reg,total`).
    pub fn loss_history_csv(&self) -> String {
        let mut out = String::from("epoch,rec,pred,reg,total\n");
        for e in &self.loss_history {
            out.push_str(&format!("{},{},{},{},{}\n", e.epoch, e.rec, e.pred, e.reg, e.total));
        }
        out
    }
}

/// Fresh encoder and decoder for `p` inputs, both drawn from one seeded stream.
pub fn init_autoencoder(p: usize, d: usize, seed: u64) -> Result<(MlpParams, MlpParams)> {
    if d > p {
        return Err(Error::config("d", format!("latent dimension {d} exceeds p = {p}")));
    }
    let (enc_spec, dec_spec) = default_architecture(p, d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let encoder = init_params_with_rng(&enc_spec, &mut rng)?;
    let decoder = init_params_with_rng(&dec_spec, &mut rng)?;
    Ok((encoder, decoder))
}

fn batch_rows(n: usize, batches: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    if batches <= 1 {
        return vec![(0..n).collect()];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let base = n / batches;
    let extra = n % batches;
    let mut out = Vec::with_capacity(batches);
    let mut start = 0;
    for b in 0..batches {
        let len = base + usize::from(b < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Full-batch (by default) Adam training on the composite loss.
///
/// Each epoch records the loss at the parameters its gradient was taken at.
/// With `batches > 1` rows are reshuffled every epoch, split contiguously, and
/// local neighborhoods are formed within each batch.
pub fn train(data: &Dataset, cfg: &TrainConfig, par: Parallelism) -> Result<TrainedModel> {
    cfg.validate()?;
    let n = data.n();
    if cfg.batches > n / 2 {
        return Err(Error::config("batches", "each batch needs at least two rows"));
    }
    let (mut encoder, mut decoder) = init_autoencoder(data.p(), cfg.d, cfg.seed)?;
    let n_enc = encoder.n_params();
    let mut flat: Vec<f64> = encoder.to_flat();
    flat.extend(decoder.to_flat());
    let mut adam = AdamState::new(flat.len(), cfg.lr);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_ba7c);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let groups = batch_rows(n, cfg.batches, &mut shuffle_rng);
        let mut sum = LossComponents {
            rec: 0.0,
            pred: 0.0,
            reg: 0.0,
            total: 0.0,
        };
        for rows in &groups {
            let (xb, yb) = if groups.len() == 1 {
                (data.x.clone(), data.y.clone())
            } else {
                (data.x.select(Axis(0), rows), data.y.select(Axis(0), rows))
            };
            let (c, ge, gd) =
                composite_loss_and_gradient(xb.view(), yb.view(), &encoder, &decoder, cfg, par)
                    .map_err(|e| Error::NonFiniteLoss {
                        epoch,
                        detail: e.to_string(),
                    })?;
            sum.rec += c.rec;
            sum.pred += c.pred;
            sum.reg += c.reg;
            sum.total += c.total;
            let mut grads = ge.to_flat();
            grads.extend(gd.to_flat());
            adam_step(&mut flat, &grads, &mut adam)?;
            encoder.assign_flat(&flat[..n_enc]);
            decoder.assign_flat(&flat[n_enc..]);
        }
        let m = groups.len() as f64;
        history.push(EpochLoss {
            epoch,
            rec: sum.rec / m,
            pred: sum.pred / m,
            reg: sum.reg / m,
            total: sum.total / m,
        });
        if !(encoder.all_finite() && decoder.all_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: "parameters became non-finite".into(),
            });
        }
    }

    let z = encoder.forward(data.x.view())?;
    let final_bundle = local_fit_bundle(z.view(), data.y.view(), &cfg.kernel, par)?;
    Ok(TrainedModel {
        encoder,
        decoder,
        config: *cfg,
        loss_history: history,
        final_bundle,
    })
}
