use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::distributions::{student_t_quantile, student_t_two_sided_p};
use crate::linalg::{with_intercept, Cholesky};
use crate::{Error, Result};

/// Ordinary least squares fit with an intercept and classical inference.
///
/// All coefficient-indexed vectors put the intercept first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OlsResult {
    pub coefficients: Array1<f64>,
    pub standard_errors: Array1<f64>,
    pub t_values: Array1<f64>,
    pub p_values: Array1<f64>,
    pub ci_lower: Array1<f64>,
    pub ci_upper: Array1<f64>,
    pub ci_level: f64,
    pub r_squared: f64,
    pub residuals: Array1<f64>,
    pub rss: f64,
    pub n_obs: usize,
    pub n_params: usize,
    pub aic: f64,
}

impl OlsResult {
    pub fn residual_df(&self) -> usize {
        self.n_obs - self.n_params
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let b0 = self.coefficients[0];
        let slopes = self.coefficients.slice(ndarray::s![1..]);
        x.dot(&slopes) + b0
    }
}

/// Gaussian AIC up to an additive constant: `n ln(RSS/n) + 2k`, where `k`
/// counts the mean parameters plus one for the error variance.
pub fn gaussian_aic(rss: f64, n_obs: usize, n_mean_params: usize) -> f64 {
    let n = n_obs as f64;
    n * (rss.max(1e-300) / n).ln() + 2.0 * (n_mean_params as f64 + 1.0)
}

/// OLS of `y` on `[1, x]`. `alpha` sets the two-sided confidence level `1 - alpha`.
pub fn ols_fit(x: ArrayView2<f64>, y: ArrayView1<f64>, alpha: f64) -> Result<OlsResult> {
    let (n, q) = x.dim();
    if y.len() != n {
        return Err(Error::Shape(format!("ols: x has {n} rows, y has {}", y.len())));
    }
    if n <= q + 1 {
        return Err(Error::TooFewRows(format!(
            "ols needs n > q + 1 (n = {n}, q = {q})"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("alpha", format!("{alpha} not in (0, 1)")));
    }
    let design = with_intercept(x);
    let gram = design.t().dot(&design);
    let chol = Cholesky::new(gram.view())
        .map_err(|e| Error::Singular(format!("ols design: {e}")))?;
    let coefficients = chol.solve(design.t().dot(&y).view());
    let residuals = &y - &design.dot(&coefficients);
    let rss = residuals.dot(&residuals);
    let n_params = q + 1;
    let df = (n - n_params) as f64;
    let sigma2 = rss / df;
    let inv = chol.inverse();
    let standard_errors: Array1<f64> = inv.diag().mapv(|v| (v.max(0.0) * sigma2).sqrt());
    let t_crit = student_t_quantile(1.0 - alpha / 2.0, df);
    let ci_lower = &coefficients - &(&standard_errors * t_crit);
    let ci_upper = &coefficients + &(&standard_errors * t_crit);
    let t_values: Array1<f64> = coefficients
        .iter()
        .zip(standard_errors.iter())
        .map(|(&b, &se)| t_ratio(b, se))
        .collect();
    let p_values = t_values.mapv(|t| student_t_two_sided_p(t, df));

    let mean = y.mean().unwrap_or(0.0);
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let r_squared = if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(OlsResult {
        coefficients,
        standard_errors,
        t_values,
        p_values,
        ci_lower,
        ci_upper,
        ci_level: 1.0 - alpha,
        r_squared,
        residuals,
        rss,
        n_obs: n,
        n_params,
        aic: gaussian_aic(rss, n, n_params),
    })
}

fn t_ratio(b: f64, se: f64) -> f64 {
    if se > 0.0 {
        b / se
    } else if b == 0.0 {
        0.0
    } else {
        b.signum() * f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WlsResult {
    /// Intercept first.
    pub coefficients: Array1<f64>,
    pub weighted_rss: f64,
    pub weight_sum: f64,
}

/// Assembles the ridge-augmented weighted normal equations for the design
/// `[1, x]` without materializing it: returns `(XᵀWX + eps·P, XᵀWy)` where `P`
/// is the identity with a zero in the intercept slot.
pub fn weighted_normal_equations(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
    ridge_eps: f64,
) -> (Array2<f64>, Array1<f64>) {
    let (n, q) = x.dim();
    let m = q + 1;
    let mut a = Array2::<f64>::zeros((m, m));
    let mut b = Array1::<f64>::zeros(m);
    let mut row = vec![0.0; m];
    row[0] = 1.0;
    for j in 0..n {
        let wj = w[j];
        if wj == 0.0 {
            continue;
        }
        for c in 0..q {
            row[c + 1] = x[[j, c]];
        }
        let wy = wj * y[j];
        for r in 0..m {
            let wr = wj * row[r];
            b[r] += row[r] * wy;
            for c in 0..=r {
                a[[r, c]] += wr * row[c];
            }
        }
    }
    for r in 0..m {
        for c in 0..r {
            a[[c, r]] = a[[r, c]];
        }
    }
    for d in 1..m {
        a[[d, d]] += ridge_eps;
    }
    (a, b)
}

/// Weighted least squares of `y` on `[1, x]` with an unpenalized intercept and
/// ridge penalty `ridge_eps · ‖slopes‖²`.
pub fn wls_fit(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
    ridge_eps: f64,
) -> Result<WlsResult> {
    let n = x.nrows();
    if y.len() != n || w.len() != n {
        return Err(Error::Shape(format!(
            "wls: x has {n} rows, y {}, w {}",
            y.len(),
            w.len()
        )));
    }
    if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::config("weights", "must be finite and non-negative"));
    }
    if ridge_eps < 0.0 {
        return Err(Error::config("ridge_eps", "must be non-negative"));
    }
    let (a, b) = weighted_normal_equations(x, y, w, ridge_eps);
    let chol =
        Cholesky::new(a.view()).map_err(|e| Error::Singular(format!("weighted gram: {e}")))?;
    let coefficients = chol.solve(b.view());
    let weighted_rss = weighted_rss(x, y, w, coefficients.view());
    Ok(WlsResult {
        coefficients,
        weighted_rss,
        weight_sum: w.sum(),
    })
}

/// `Σ w_j (y_j − [1, x_j]·β)²`.
pub fn weighted_rss(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
    beta: ArrayView1<f64>,
) -> f64 {
    let q = x.ncols();
    let mut total = 0.0;
    for j in 0..x.nrows() {
        let mut fit = beta[0];
        for c in 0..q {
            fit += beta[c + 1] * x[[j, c]];
        }
        let r = y[j] - fit;
        total += w[j] * r * r;
    }
    total
}

/// Minimizer of `Σ w_j (y_j − b)²`.
pub fn weighted_mean_fit(y: ArrayView1<f64>, w: ArrayView1<f64>) -> Result<f64> {
    if y.len() != w.len() {
        return Err(Error::Shape("weighted mean: length mismatch".into()));
    }
    let total: f64 = w.sum();
    if !(total > 0.0) {
        return Err(Error::config("weights", "sum must be positive"));
    }
    Ok(y.dot(&w) / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_design(n: usize, q: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, q), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        (x, y)
    }

    #[test]
    fn exact_line_fit() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let y = x.column(0).mapv(|v| 2.0 * v);
        let fit = ols_fit(x.view(), y.view(), 0.05).unwrap();
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn intercept_only_is_mean() {
        let x = Array2::<f64>::zeros((5, 0));
        let y = array![1.0, 2.0, 3.0, 4.0, 10.0];
        let fit = ols_fit(x.view(), y.view(), 0.05).unwrap();
        assert!((fit.coefficients[0] - 4.0).abs() < 1e-12);
        assert_eq!(fit.coefficients.len(), 1);
    }

    #[test]
    fn ci_brackets_coefficients_and_aic_formula() {
        let (x, y) = random_design(30, 3, 4);
        let fit = ols_fit(x.view(), y.view(), 0.05).unwrap();
        for k in 0..4 {
            assert!(fit.ci_lower[k] <= fit.coefficients[k]);
            assert!(fit.coefficients[k] <= fit.ci_upper[k]);
        }
        let want = 30.0 * (fit.rss / 30.0).ln() + 2.0 * 5.0;
        assert!((fit.aic - want).abs() < 1e-12);
    }

    #[test]
    fn rejects_too_few_rows_and_singular() {
        let (x, y) = random_design(3, 2, 1);
        assert!(matches!(
            ols_fit(x.view(), y.view(), 0.05),
            Err(Error::TooFewRows(_))
        ));
        let x = Array2::from_shape_fn((10, 2), |(i, _)| i as f64);
        let y = Array1::from_shape_fn(10, |i| i as f64);
        assert!(matches!(
            ols_fit(x.view(), y.view(), 0.05),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn wls_two_point_interpolation() {
        // weight only on (1, 3) and (3, 7): line y = 2x + 1
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = array![5.0, 3.0, -4.0, 7.0];
        let w = array![0.0, 1.0, 0.0, 1.0];
        let fit = wls_fit(x.view(), y.view(), w.view(), 0.0).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.weighted_rss.abs() < 1e-20);
        assert_eq!(fit.weight_sum, 2.0);
    }

    #[test]
    fn wls_zero_response() {
        let (x, _) = random_design(12, 2, 9);
        let y = Array1::zeros(12);
        let w = Array1::from_elem(12, 0.5);
        let fit = wls_fit(x.view(), y.view(), w.view(), 1e-6).unwrap();
        assert!(fit.coefficients.iter().all(|&b| b == 0.0));
        assert_eq!(fit.weighted_rss, 0.0);
    }

    #[test]
    fn wls_singular_without_ridge() {
        let x = array![[0.0], [1.0], [2.0]];
        let y = array![1.0, 2.0, 3.0];
        let w = array![1.0, 0.0, 0.0];
        assert!(wls_fit(x.view(), y.view(), w.view(), 0.0).is_err());
        assert!(wls_fit(x.view(), y.view(), w.view(), 1e-6).is_ok());
    }

    #[test]
    fn weighted_mean_cases() {
        let y = array![0.0, 4.0];
        assert_eq!(weighted_mean_fit(y.view(), array![1.0, 3.0].view()).unwrap(), 3.0);
        assert_eq!(weighted_mean_fit(y.view(), array![1.0, 1.0].view()).unwrap(), 2.0);
        assert_eq!(weighted_mean_fit(y.view(), array![0.0, 1.0].view()).unwrap(), 4.0);
        assert!(weighted_mean_fit(y.view(), array![0.0, 0.0].view()).is_err());
    }
}
