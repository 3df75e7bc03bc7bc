//! Localized regression in latent space.
//!
//! Every subject `i` gets a weighted linear model of `y` on `[1, z]` whose
//! weights decay with latent distance:
//!
//! ```text
//! w_ij = exp(−(‖z_i − z_j‖ / d_k(z_i))² / (2σ²))
//! ```
//!
//! where `d_k(z_i)` is the distance from `z_i` to its `k`-th nearest other
//! subject. Each local fit is compared against a weighted intercept-only
//! model under the same weights through the profile Gaussian likelihood
//! ratio
//!
//! ```text
//! llr_i = (S_i / 2) · (ln RSS_full,i − ln RSS_null,i),   S_i = Σ_j w_ij
//! ```
//!
//! which is never positive: the ridge-penalized full fit can always fall
//! back to the null fit. [`llr_gradient`] differentiates `Σ_i c_i llr_i`
//! with respect to the latent coordinates, through the distances, the
//! adaptive bandwidths, the kernel weights and the closed-form weighted
//! solve.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::linalg::Cholesky;
use crate::numstat::weighted_normal_equations;
use crate::{Error, Parallelism, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub sigma: f64,
    pub k_fraction: f64,
    pub ridge_eps: f64,
    pub rss_floor: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            sigma: 1.0,
            k_fraction: 0.10,
            ridge_eps: 1e-6,
            rss_floor: 1e-12,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::config("kernel.sigma", "must be positive"));
        }
        if !(self.k_fraction > 0.0 && self.k_fraction <= 1.0) {
            return Err(Error::config("kernel.k_fraction", "must be in (0, 1]"));
        }
        if !(self.ridge_eps >= 0.0) {
            return Err(Error::config("kernel.ridge_eps", "must be non-negative"));
        }
        if !(self.rss_floor > 0.0) {
            return Err(Error::config("kernel.rss_floor", "must be positive"));
        }
        Ok(())
    }

    /// Neighbor order for `n` subjects: `max(1, round(k_fraction · n))`,
    /// capped at `n − 1`.
    pub fn k_for(&self, n: usize) -> usize {
        let k = (self.k_fraction * n as f64).round() as usize;
        k.max(1).min(n.saturating_sub(1).max(1))
    }

    /// Replacement bandwidth when duplicate points make `d_k = 0`.
    pub fn bandwidth_floor(&self) -> f64 {
        self.rss_floor.sqrt()
    }
}

/// Euclidean distances between the rows of `z`.
pub fn pairwise_distances(z: ArrayView2<f64>) -> Array2<f64> {
    let n = z.nrows();
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for (a, b) in z.row(i).iter().zip(z.row(j).iter()) {
                acc += (a - b) * (a - b);
            }
            let v = acc.sqrt();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    pub values: Array1<f64>,
    /// Index of the `k`-th nearest neighbor of each subject.
    pub neighbor: Vec<usize>,
    /// Subjects whose bandwidth collapsed to zero and was floored.
    pub degenerate: Vec<usize>,
}

/// `k`-th smallest off-diagonal distance in each row; the diagonal (self) is
/// excluded. Zero bandwidths are replaced by `floor` and reported.
pub fn adaptive_bandwidths(distances: ArrayView2<f64>, k: usize, floor: f64) -> Result<Bandwidths> {
    let n = distances.nrows();
    if k == 0 || k > n.saturating_sub(1) {
        return Err(Error::config("k", format!("{k} not in 1..={}", n.saturating_sub(1))));
    }
    let mut values = Array1::<f64>::zeros(n);
    let mut neighbor = vec![0usize; n];
    let mut degenerate = Vec::new();
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        let row = distances.row(i);
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let nb = order[k - 1];
        neighbor[i] = nb;
        let v = row[nb];
        if v > 0.0 {
            values[i] = v;
        } else {
            values[i] = floor;
            degenerate.push(i);
        }
    }
    Ok(Bandwidths {
        values,
        neighbor,
        degenerate,
    })
}

/// `W_ij = exp(−(D_ij / h_i)² / (2σ²))`; rows are not normalized.
pub fn kernel_weights(distances: ArrayView2<f64>, bandwidths: ArrayView1<f64>, sigma: f64) -> Array2<f64> {
    let two_s2 = 2.0 * sigma * sigma;
    let mut w = Array2::<f64>::zeros(distances.raw_dim());
    for ((i, j), v) in w.indexed_iter_mut() {
        let u = distances[[i, j]] / bandwidths[i];
        *v = (-(u * u) / two_s2).exp();
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFitBundle {
    pub z: Array2<f64>,
    pub distances: Array2<f64>,
    pub bandwidths: Bandwidths,
    /// Row `i` holds the weights of subject `i`'s local model.
    pub weights: Array2<f64>,
    /// `n × (d + 1)`, intercept first.
    pub coefficients: Array2<f64>,
    pub null_intercepts: Array1<f64>,
    pub rss_full: Array1<f64>,
    pub rss_null: Array1<f64>,
    pub weight_sums: Array1<f64>,
    pub llr: Array1<f64>,
}

impl LocalFitBundle {
    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn d(&self) -> usize {
        self.z.ncols()
    }

    /// `[1, z_i]·β_i` for every subject.
    pub fn local_predictions(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.n(), |i| {
            let b = self.coefficients.row(i);
            b[0] + self.z.row(i).dot(&b.slice(s![1..]))
        })
    }
}

struct SubjectFit {
    beta: Array1<f64>,
    null_intercept: f64,
    rss_full: f64,
    rss_null: f64,
    weight_sum: f64,
    llr: f64,
}

fn fit_subject(
    z: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
    cfg: &KernelConfig,
) -> Result<(SubjectFit, Cholesky)> {
    let (a, b) = weighted_normal_equations(z, y, w, cfg.ridge_eps);
    let chol = Cholesky::new(a.view())?;
    let beta = chol.solve(b.view());
    let weight_sum = w.sum();
    let null_intercept = y.dot(&w) / weight_sum;
    let (mut rss_full, mut rss_null) = (0.0, 0.0);
    for j in 0..z.nrows() {
        let fit = beta[0] + z.row(j).dot(&beta.slice(s![1..]));
        let r = y[j] - fit;
        let r0 = y[j] - null_intercept;
        rss_full += w[j] * r * r;
        rss_null += w[j] * r0 * r0;
    }
    let llr = 0.5
        * weight_sum
        * (rss_full.max(cfg.rss_floor).ln() - rss_null.max(cfg.rss_floor).ln());
    Ok((
        SubjectFit {
            beta,
            null_intercept,
            rss_full,
            rss_null,
            weight_sum,
            llr,
        },
        chol,
    ))
}

/// Per-subject results of [`fit_local_models`].
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFits {
    pub coefficients: Array2<f64>,
    pub null_intercepts: Array1<f64>,
    pub rss_full: Array1<f64>,
    pub rss_null: Array1<f64>,
    pub weight_sums: Array1<f64>,
    pub llr: Array1<f64>,
}

/// Per-subject weighted full and null fits given a weight matrix.
pub fn fit_local_models(
    z: ArrayView2<f64>,
    y: ArrayView1<f64>,
    weights: ArrayView2<f64>,
    cfg: &KernelConfig,
    par: Parallelism,
) -> Result<LocalFits> {
    let (n, d) = z.dim();
    if y.len() != n || weights.dim() != (n, n) {
        return Err(Error::Shape(format!(
            "local fits: z is {n}x{d}, y has {}, weights {:?}",
            y.len(),
            weights.dim()
        )));
    }
    let fits = par.map_indices(n, |i| {
        fit_subject(z, y, weights.row(i), cfg)
            .map(|(f, _)| f)
            .map_err(|e| Error::Singular(format!("local model {i}: {e}")))
    });
    let mut coefficients = Array2::<f64>::zeros((n, d + 1));
    let mut null_intercepts = Array1::zeros(n);
    let mut rss_full = Array1::zeros(n);
    let mut rss_null = Array1::zeros(n);
    let mut weight_sums = Array1::zeros(n);
    let mut llr = Array1::zeros(n);
    for (i, f) in fits.into_iter().enumerate() {
        let f = f?;
        coefficients.row_mut(i).assign(&f.beta);
        null_intercepts[i] = f.null_intercept;
        rss_full[i] = f.rss_full;
        rss_null[i] = f.rss_null;
        weight_sums[i] = f.weight_sum;
        llr[i] = f.llr;
    }
    Ok(LocalFits {
        coefficients,
        null_intercepts,
        rss_full,
        rss_null,
        weight_sums,
        llr,
    })
}

/// Distances, bandwidths, weights and all local fits for latent matrix `z`.
pub fn local_fit_bundle(
    z: ArrayView2<f64>,
    y: ArrayView1<f64>,
    cfg: &KernelConfig,
    par: Parallelism,
) -> Result<LocalFitBundle> {
    cfg.validate()?;
    let n = z.nrows();
    if n < 2 {
        return Err(Error::TooFewRows("local fits need at least two subjects".into()));
    }
    let distances = pairwise_distances(z);
    let bandwidths = adaptive_bandwidths(distances.view(), cfg.k_for(n), cfg.bandwidth_floor())?;
    let weights = kernel_weights(distances.view(), bandwidths.values.view(), cfg.sigma);
    let LocalFits {
        coefficients,
        null_intercepts,
        rss_full,
        rss_null,
        weight_sums,
        llr,
    } = fit_local_models(z, y, weights.view(), cfg, par)?;
    Ok(LocalFitBundle {
        z: z.to_owned(),
        distances,
        bandwidths,
        weights,
        coefficients,
        null_intercepts,
        rss_full,
        rss_null,
        weight_sums,
        llr,
    })
}

struct SubjectGradient {
    /// Coefficient on `(β_s + v_s)` for each `z_j` (design dependence).
    a: Array1<f64>,
    /// Coefficient on `β_s` for each `z_j`.
    b: Array1<f64>,
    beta_plus_v: Array1<f64>,
    beta: Array1<f64>,
    /// `∂(c_i llr_i)/∂D_ij`, including the bandwidth path.
    g_dist: Array1<f64>,
}

fn subject_gradient(
    i: usize,
    bundle: &LocalFitBundle,
    y: ArrayView1<f64>,
    cfg: &KernelConfig,
    scale: f64,
) -> Result<SubjectGradient> {
    let z = bundle.z.view();
    let (n, d) = z.dim();
    let w = bundle.weights.row(i);
    let (fit, chol) = fit_subject(z, y, w, cfg)?;
    let beta = fit.beta;
    // v = A⁻¹ (ε P β): the ridge correction to the envelope argument.
    let mut p_beta = beta.clone();
    p_beta[0] = 0.0;
    p_beta *= cfg.ridge_eps;
    let v = if cfg.ridge_eps > 0.0 {
        chol.solve(p_beta.view())
    } else {
        Array1::zeros(d + 1)
    };

    let full_active = fit.rss_full >= cfg.rss_floor;
    let null_active = fit.rss_null >= cfg.rss_floor;
    let log_ratio = fit.rss_full.max(cfg.rss_floor).ln() - fit.rss_null.max(cfg.rss_floor).ln();
    let half_s = 0.5 * fit.weight_sum;
    let inv_full = if full_active { half_s / fit.rss_full } else { 0.0 };
    let inv_null = if null_active { half_s / fit.rss_null } else { 0.0 };

    let mut a = Array1::<f64>::zeros(n);
    let mut b = Array1::<f64>::zeros(n);
    let mut g_w = Array1::<f64>::zeros(n);
    for j in 0..n {
        let zj = z.row(j);
        let fit_j = beta[0] + zj.dot(&beta.slice(s![1..]));
        let xv = v[0] + zj.dot(&v.slice(s![1..]));
        let r = y[j] - fit_j;
        let r0 = y[j] - fit.null_intercept;
        g_w[j] = scale
            * (0.5 * log_ratio + inv_full * (r * r - 2.0 * r * xv) - inv_null * r0 * r0);
        a[j] = scale * inv_full * (-2.0 * w[j] * r);
        b[j] = scale * inv_full * (2.0 * w[j] * xv);
    }

    // Kernel weights → distances and bandwidth.
    let h = bundle.bandwidths.values[i];
    let inv_s2h2 = 1.0 / (cfg.sigma * cfg.sigma * h * h);
    let mut g_dist = Array1::<f64>::zeros(n);
    let mut g_h = 0.0;
    for j in 0..n {
        if j == i {
            continue;
        }
        let dij = bundle.distances[[i, j]];
        let wij = w[j];
        g_dist[j] += g_w[j] * (-wij * dij * inv_s2h2);
        g_h += g_w[j] * wij * dij * dij * inv_s2h2 / h;
    }
    let degenerate = bundle.bandwidths.degenerate.binary_search(&i).is_ok();
    if !degenerate {
        g_dist[bundle.bandwidths.neighbor[i]] += g_h;
    }
    let beta_s = beta.slice(s![1..]).to_owned();
    let beta_plus_v = &beta_s + &v.slice(s![1..]);
    Ok(SubjectGradient {
        a,
        b,
        beta_plus_v,
        beta: beta_s,
        g_dist,
    })
}

/// Gradient of `Σ_i c_i · llr_i` with respect to the latent matrix.
///
/// Neighbor identities behind the adaptive bandwidths are treated as locally
/// constant; floored residual sums contribute no gradient.
pub fn llr_gradient(
    bundle: &LocalFitBundle,
    y: ArrayView1<f64>,
    cfg: &KernelConfig,
    upstream: ArrayView1<f64>,
    par: Parallelism,
) -> Result<Array2<f64>> {
    let (n, d) = bundle.z.dim();
    let parts = par.map_indices(n, |i| subject_gradient(i, bundle, y, cfg, upstream[i]));
    let mut a = Array2::<f64>::zeros((n, n));
    let mut b = Array2::<f64>::zeros((n, n));
    let mut bpv = Array2::<f64>::zeros((n, d));
    let mut beta = Array2::<f64>::zeros((n, d));
    let mut g_dist = Array2::<f64>::zeros((n, n));
    for (i, part) in parts.into_iter().enumerate() {
        let part = part?;
        a.row_mut(i).assign(&part.a);
        b.row_mut(i).assign(&part.b);
        bpv.row_mut(i).assign(&part.beta_plus_v);
        beta.row_mut(i).assign(&part.beta);
        g_dist.row_mut(i).assign(&part.g_dist);
    }
    // design path: ∂/∂z_j = Σ_i a_ij (β_i + v_i) + b_ij β_i
    let mut grad = a.t().dot(&bpv) + b.t().dot(&beta);
    // distance path: D_ij = ‖z_i − z_j‖
    let mut m = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let dij = bundle.distances[[i, j]];
            if dij > 0.0 {
                m[[i, j]] = g_dist[[i, j]] / dij;
            }
        }
    }
    let sym = &m + &m.t();
    let row_sums = sym.sum_axis(Axis(1));
    let z = &bundle.z;
    grad += &(z * &row_sums.insert_axis(Axis(1)));
    grad -= &sym.dot(z);
    Ok(grad)
}

/// Local models centred at new points, weighted over reference points only.
///
/// The bandwidth of a new point is the distance to its `k`-th nearest
/// reference point, skipping one exact duplicate so that a copy of a
/// reference point reproduces that point's own local model.
pub fn fit_at_points(
    z_ref: ArrayView2<f64>,
    y_ref: ArrayView1<f64>,
    z_new: ArrayView2<f64>,
    cfg: &KernelConfig,
    par: Parallelism,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    let (n, d) = z_ref.dim();
    if z_new.ncols() != d {
        return Err(Error::Shape("new points have a different latent dimension".into()));
    }
    let k = cfg.k_for(n);
    let rows = par.map_indices(z_new.nrows(), |t| {
        let zt = z_new.row(t);
        let dist: Array1<f64> = z_ref
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .zip(zt.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let mut sorted = dist.to_vec();
        sorted.sort_by(f64::total_cmp);
        let offset = usize::from(sorted[0] == 0.0);
        let h = sorted
            .get(k - 1 + offset)
            .copied()
            .unwrap_or(sorted[n - 1]);
        let h = if h > 0.0 { h } else { cfg.bandwidth_floor() };
        let two_s2 = 2.0 * cfg.sigma * cfg.sigma;
        let w = dist.mapv(|v| (-(v / h) * (v / h) / two_s2).exp());
        fit_subject(z_ref, y_ref, w.view(), cfg).map(|(f, _)| f.beta)
    });
    let mut out = Array2::<f64>::zeros((z_new.nrows(), d + 1));
    for (t, r) in rows.into_iter().enumerate() {
        out.row_mut(t).assign(&r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(points: &[f64]) -> Array2<f64> {
        Array2::from_shape_fn((points.len(), 1), |(i, _)| points[i])
    }

    #[test]
    fn number_line_distances() {
        let d = pairwise_distances(line(&[0.0, 3.0, 4.0]).view());
        assert_eq!(d[[0, 1]], 3.0);
        assert_eq!(d[[0, 2]], 4.0);
        assert_eq!(d[[1, 2]], 1.0);
        assert_eq!(d, d.t());
        let dup = pairwise_distances(array![[1.0, 2.0], [1.0, 2.0]].view());
        assert_eq!(dup[[0, 1]], 0.0);
    }

    #[test]
    fn bandwidth_examples() {
        let d = pairwise_distances(line(&[0.0, 1.0, 2.0, 3.0]).view());
        let b1 = adaptive_bandwidths(d.view(), 1, 1e-6).unwrap();
        assert_eq!(b1.values.to_vec(), vec![1.0, 1.0, 1.0, 1.0]);
        let b2 = adaptive_bandwidths(d.view(), 2, 1e-6).unwrap();
        assert_eq!(b2.values.to_vec(), vec![2.0, 1.0, 1.0, 2.0]);
        let b3 = adaptive_bandwidths(d.view(), 3, 1e-6).unwrap();
        assert_eq!(b3.values.to_vec(), vec![3.0, 2.0, 2.0, 3.0]);
        assert!(adaptive_bandwidths(d.view(), 4, 1e-6).is_err());
    }

    #[test]
    fn duplicate_points_floor_bandwidth() {
        let d = pairwise_distances(line(&[0.0, 0.0, 5.0]).view());
        let b = adaptive_bandwidths(d.view(), 1, 1e-6).unwrap();
        assert_eq!(b.degenerate, vec![0, 1]);
        assert_eq!(b.values[0], 1e-6);
        assert_eq!(b.values[2], 5.0);
    }

    #[test]
    fn kernel_values() {
        let d = pairwise_distances(line(&[0.0, 1.0, 2.0, 3.0]).view());
        let b = adaptive_bandwidths(d.view(), 1, 1e-6).unwrap();
        let w = kernel_weights(d.view(), b.values.view(), 1.0);
        for i in 0..4 {
            assert_eq!(w[[i, i]], 1.0);
        }
        assert!((w[[0, 1]] - (-0.5f64).exp()).abs() < 1e-15);
        assert!(w[[0, 1]] > w[[0, 2]] && w[[0, 2]] > w[[0, 3]]);
    }

    #[test]
    fn zero_outcome_gives_zero_fits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = Array2::from_shape_fn((15, 2), |_| rng.random_range(-1.0..1.0));
        let y = Array1::zeros(15);
        let b = local_fit_bundle(z.view(), y.view(), &KernelConfig::default(), Parallelism::Sequential)
            .unwrap();
        assert!(b.coefficients.iter().all(|&v| v == 0.0));
        assert!(b.llr.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn globally_linear_outcome() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = Array2::from_shape_fn((25, 2), |_| rng.random_range(-1.0..1.0));
        let y = z.column(0).mapv(|v| 0.5 + 2.0 * v) - &z.column(1).mapv(|v| 1.5 * v);
        let cfg = KernelConfig { ridge_eps: 0.0, ..Default::default() };
        let b = local_fit_bundle(z.view(), y.view(), &cfg, Parallelism::Sequential).unwrap();
        for i in 0..25 {
            let row = b.coefficients.row(i);
            assert!((row[0] - 0.5).abs() < 1e-8);
            assert!((row[1] - 2.0).abs() < 1e-8);
            assert!((row[2] + 1.5).abs() < 1e-8);
            assert!(b.llr[i] < -1.0);
        }
    }

    #[test]
    fn test_point_duplicate_matches_reference_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = Array2::from_shape_fn((30, 3), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(30, |_| rng.random_range(-1.0..1.0));
        let cfg = KernelConfig::default();
        let b = local_fit_bundle(z.view(), y.view(), &cfg, Parallelism::Sequential).unwrap();
        let pick = z.select(Axis(0), &[4, 17]);
        let fitted = fit_at_points(z.view(), y.view(), pick.view(), &cfg, Parallelism::Sequential).unwrap();
        for (t, &i) in [4usize, 17].iter().enumerate() {
            for c in 0..4 {
                assert!((fitted[[t, c]] - b.coefficients[[i, c]]).abs() < 1e-8);
            }
        }
        let empty = fit_at_points(z.view(), y.view(), Array2::zeros((0, 3)).view(), &cfg, Parallelism::Sequential).unwrap();
        assert_eq!(empty.nrows(), 0);
    }

    #[test]
    fn k_from_fraction() {
        let cfg = KernelConfig::default();
        assert_eq!(cfg.k_for(173), 17);
        assert_eq!(cfg.k_for(5), 1);
        assert_eq!(cfg.k_for(200), 20);
    }
}
