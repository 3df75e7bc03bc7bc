use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::localreg::{llr_gradient, local_fit_bundle, LocalFitBundle};
use crate::neural::MlpParams;
use crate::{Error, Parallelism, Result};

/// `‖X − X̂‖²_F / (n·p)`.
pub fn loss_rec(x: ArrayView2<f64>, x_hat: ArrayView2<f64>) -> f64 {
    let count = x.len() as f64;
    let mut acc = 0.0;
    ndarray::Zip::from(x).and(x_hat).for_each(|a, b| {
        acc += (a - b) * (a - b);
    });
    acc / count
}

/// Mean per-subject log likelihood ratio.
pub fn loss_pred(bundle: &LocalFitBundle) -> f64 {
    bundle.llr.mean().unwrap_or(0.0)
}

/// Centered, unit-norm latent columns; `None` for constant columns.
fn normalized_columns(z: ArrayView2<f64>) -> Vec<Option<(ndarray::Array1<f64>, f64)>> {
    let mean = z.mean_axis(Axis(0)).expect("nonempty latent");
    z.columns()
        .into_iter()
        .zip(mean.iter())
        .map(|(c, &m)| {
            let centered = c.mapv(|v| v - m);
            let norm = centered.dot(&centered).sqrt();
            (norm > 0.0).then(|| (centered / norm, norm))
        })
        .collect()
}

/// Sum of squared Pearson correlations over ordered pairs of distinct latent
/// columns. Constant columns contribute nothing.
pub fn loss_reg(z: ArrayView2<f64>) -> f64 {
    let cols = normalized_columns(z);
    let d = cols.len();
    let mut total = 0.0;
    for k in 0..d {
        for l in (k + 1)..d {
            if let (Some((uk, _)), Some((ul, _))) = (&cols[k], &cols[l]) {
                let r = uk.dot(ul);
                total += 2.0 * r * r;
            }
        }
    }
    total
}

/// `∂ loss_reg / ∂Z`.
pub fn loss_reg_gradient(z: ArrayView2<f64>) -> Array2<f64> {
    let cols = normalized_columns(z);
    let d = cols.len();
    let mut grad = Array2::<f64>::zeros(z.raw_dim());
    for k in 0..d {
        let Some((uk, nk)) = &cols[k] else { continue };
        for l in 0..d {
            if l == k {
                continue;
            }
            let Some((ul, _)) = &cols[l] else { continue };
            let r = uk.dot(ul);
            // ∂r/∂z_k = (u_l − r u_k) / ‖c_k‖, and each unordered pair counts twice
            let g = (ul - &(uk * r)) * (4.0 * r / nk);
            let mut col = grad.column_mut(k);
            col += &g;
        }
    }
    grad
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub rec: f64,
    pub pred: f64,
    pub reg: f64,
    pub total: f64,
}

impl LossComponents {
    fn combine(rec: f64, pred: f64, reg: f64, cfg: &TrainConfig) -> Self {
        LossComponents {
            rec,
            pred,
            reg,
            total: cfg.lambda_rec * rec + cfg.lambda_pred * pred + cfg.lambda_reg * reg,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.rec.is_finite() && self.pred.is_finite() && self.reg.is_finite() && self.total.is_finite()
    }
}

/// Composite loss at the current parameters, with the local-fit bundle it was
/// computed from.
pub fn composite_loss(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    encoder: &MlpParams,
    decoder: &MlpParams,
    cfg: &TrainConfig,
    par: Parallelism,
) -> Result<(LossComponents, LocalFitBundle)> {
    let z = encoder.forward(x)?;
    let x_hat = decoder.forward(z.view())?;
    let bundle = local_fit_bundle(z.view(), y, &cfg.kernel, par)?;
    let c = LossComponents::combine(
        loss_rec(x, x_hat.view()),
        loss_pred(&bundle),
        loss_reg(z.view()),
        cfg,
    );
    if !c.all_finite() {
        return Err(Error::NonFinite(format!("loss components {c:?}")));
    }
    Ok((c, bundle))
}

/// Composite loss and its gradients with respect to encoder and decoder.
pub fn composite_loss_and_gradient(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    encoder: &MlpParams,
    decoder: &MlpParams,
    cfg: &TrainConfig,
    par: Parallelism,
) -> Result<(LossComponents, MlpParams, MlpParams)> {
    let enc_cache = encoder.forward_cached(x)?;
    let z = enc_cache.output().clone();
    let dec_cache = decoder.forward_cached(z.view())?;
    let x_hat = dec_cache.output();
    let bundle = local_fit_bundle(z.view(), y, &cfg.kernel, par)?;
    let c = LossComponents::combine(
        loss_rec(x, x_hat.view()),
        loss_pred(&bundle),
        loss_reg(z.view()),
        cfg,
    );
    if !c.all_finite() {
        return Err(Error::NonFinite(format!("loss components {c:?}")));
    }

    let scale = 2.0 * cfg.lambda_rec / x.len() as f64;
    let d_xhat = (x_hat - &x) * scale;
    let (dec_grads, mut d_z) = decoder.backward(&dec_cache, d_xhat.view());
    if cfg.lambda_pred != 0.0 {
        let n = z.nrows();
        let upstream = ndarray::Array1::from_elem(n, cfg.lambda_pred / n as f64);
        d_z += &llr_gradient(&bundle, y, &cfg.kernel, upstream.view(), par)?;
    }
    if cfg.lambda_reg != 0.0 {
        d_z += &(loss_reg_gradient(z.view()) * cfg.lambda_reg);
    }
    let (enc_grads, _) = encoder.backward(&enc_cache, d_z.view());
    if !enc_grads.all_finite() || !dec_grads.all_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok((c, enc_grads, dec_grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rec_examples() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(loss_rec(x.view(), x.view()), 0.0);
        let zeros = Array2::<f64>::zeros((3, 2));
        let ones = Array2::<f64>::ones((3, 2));
        assert_eq!(loss_rec(zeros.view(), ones.view()), 1.0);
        let a = array![[1.0, 0.0], [0.0, 2.0]];
        let b = Array2::<f64>::zeros((2, 2));
        assert_eq!(loss_rec(a.view(), b.view()), 1.25);
    }

    #[test]
    fn reg_examples() {
        let orth = array![[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        assert!(loss_reg(orth.view()).abs() < 1e-15);
        let dup = array![[1.0, 1.0], [2.0, 2.0], [4.0, 4.0]];
        assert!((loss_reg(dup.view()) - 2.0).abs() < 1e-12);
        // corr({1,2,3},{1,3,2}) = 0.5 → 2·0.25
        let half = array![[1.0, 1.0], [2.0, 3.0], [3.0, 2.0]];
        assert!((loss_reg(half.view()) - 0.5).abs() < 1e-12);
        let constant = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        assert_eq!(loss_reg(constant.view()), 0.0);
        assert!(loss_reg_gradient(constant.view()).iter().all(|&g| g == 0.0));
    }
}
