use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use super::distributions::student_t_two_sided_p;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
}

fn mean_var(v: ArrayView1<f64>) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Welch two-sample t-test (unequal variances), two-sided.
///
/// When both groups are constant the statistic is 0 with `p = 1` if the
/// means agree, and infinite with `p = 0` otherwise.
pub fn welch_t_test(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFewRows(format!(
            "welch t-test needs two observations per group (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            TTestResult {
                t_statistic: 0.0,
                degrees_of_freedom: df,
                p_value: 1.0,
            }
        } else {
            TTestResult {
                t_statistic: (ma - mb).signum() * f64::INFINITY,
                degrees_of_freedom: df,
                p_value: 0.0,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: student_t_two_sided_p(t, df),
    })
}

/// Sample Pearson correlation. Errors when either input is constant.
pub fn pearson_corr(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape("pearson: length mismatch".into()));
    }
    if a.len() < 2 {
        return Err(Error::TooFewRows("pearson needs two observations".into()));
    }
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantInput("pearson correlation".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}
