use ndarray::{s, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::localreg::LocalFitBundle;
use crate::numstat::{ols_fit, OlsResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalLatentModel {
    pub ols: OlsResult,
    pub latent_names: Vec<String>,
}

impl GlobalLatentModel {
    pub fn d(&self) -> usize {
        self.latent_names.len()
    }

    pub fn slope(&self, dim: usize) -> f64 {
        self.ols.coefficients[dim + 1]
    }

    pub fn predict_row(&self, z: ArrayView1<f64>) -> f64 {
        self.ols.coefficients[0] + z.dot(&self.ols.coefficients.slice(s![1..]))
    }

    /// Coefficient table: one row per term, then the R² line.
    pub fn table_csv(&self) -> String {
        let mut out = String::from("term,coefficient,std_err,t,p_value,ci_lower,ci_upper\n");
        let o = &self.ols;
        for k in 0..o.coefficients.len() {
            let term = if k == 0 {
                "Intercept"
            } else {
                self.latent_names[k - 1].as_str()
            };
            out.push_str(&format!(
                "{term},{},{},{},{},{},{}\n",
                o.coefficients[k],
                o.standard_errors[k],
                o.t_values[k],
                o.p_values[k],
                o.ci_lower[k],
                o.ci_upper[k]
            ));
        }
        out.push_str(&format!("R2,{},,,,,\n", o.r_squared));
        out
    }
}

pub fn default_latent_names(d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("Latent {k}")).collect()
}

/// Global OLS of the outcome on all latent dimensions.
pub fn fit_global(z: ArrayView2<f64>, y: ArrayView1<f64>, ci_level: f64) -> Result<GlobalLatentModel> {
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(Error::config("ci_level", "must be in (0, 1)"));
    }
    let ols = ols_fit(z, y, 1.0 - ci_level)
        .map_err(|e| match e {
            Error::Singular(m) => Error::Singular(format!("latent gram (collapsed dimensions?): {m}")),
            other => other,
        })?;
    Ok(GlobalLatentModel {
        ols,
        latent_names: default_latent_names(z.ncols()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn of(v: f64) -> Option<Direction> {
        if v > 0.0 {
            Some(Direction::Positive)
        } else if v < 0.0 {
            Some(Direction::Negative)
        } else {
            None
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Positive => "+",
            Direction::Negative => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationRecord {
    pub patient: usize,
    pub dim: usize,
    /// Local slope minus global slope.
    pub delta: f64,
    /// Local slope strictly outside the global confidence interval.
    pub flagged: bool,
    pub direction: Option<Direction>,
}

/// Records for every (subject, dimension) from a local coefficient matrix
/// (`n × (d + 1)`, intercept first).
pub fn deviations_from_coefficients(
    coefficients: ArrayView2<f64>,
    global: &GlobalLatentModel,
) -> Result<Vec<DeviationRecord>> {
    let d = global.d();
    if coefficients.ncols() != d + 1 {
        return Err(Error::Shape(format!(
            "local coefficients have {} columns, global model has {} dimensions",
            coefficients.ncols(),
            d
        )));
    }
    let mut out = Vec::with_capacity(coefficients.nrows() * d);
    for (patient, row) in coefficients.rows().into_iter().enumerate() {
        for dim in 0..d {
            let local = row[dim + 1];
            let delta = local - global.slope(dim);
            let flagged = local < global.ols.ci_lower[dim + 1] || local > global.ols.ci_upper[dim + 1];
            out.push(DeviationRecord {
                patient,
                dim,
                delta,
                flagged,
                direction: Direction::of(delta),
            });
        }
    }
    Ok(out)
}

pub fn deviations(bundle: &LocalFitBundle, global: &GlobalLatentModel) -> Result<Vec<DeviationRecord>> {
    deviations_from_coefficients(bundle.coefficients.view(), global)
}

pub fn deviations_csv(records: &[DeviationRecord]) -> String {
    let mut out = String::from("patient,dim,delta,flagged,direction\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.patient,
            r.dim,
            r.delta,
            r.flagged,
            r.direction.map(Direction::symbol).unwrap_or("0")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn latent(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn outcome_equal_to_first_dim() {
        let z = latent(40, 3, 1);
        let y = z.column(0).to_owned();
        let g = fit_global(z.view(), y.view(), 0.95).unwrap();
        assert!((g.slope(0) - 1.0).abs() < 1e-12);
        assert!(g.slope(1).abs() < 1e-12 && g.slope(2).abs() < 1e-12);
        assert!((g.ols.r_squared - 1.0).abs() < 1e-12);
        let table = g.table_csv();
        assert!(table.starts_with("term,coefficient"));
        assert!(table.contains("Intercept,"));
        assert!(table.contains("Latent 3,"));
        assert!(table.trim_end().ends_with(",,,,,"));
    }

    #[test]
    fn collapsed_latent_is_singular() {
        let mut z = latent(30, 2, 2);
        let c0 = z.column(0).to_owned();
        z.column_mut(1).assign(&c0);
        let y = Array1::from_shape_fn(30, |i| i as f64);
        assert!(matches!(fit_global(z.view(), y.view(), 0.95), Err(Error::Singular(_))));
    }

    #[test]
    fn flags_use_strict_ci() {
        let z = latent(50, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = Array1::from_shape_fn(50, |i| z[[i, 0]] + rng.random_range(-0.5..0.5));
        let g = fit_global(z.view(), y.view(), 0.95).unwrap();
        let mut b = Array2::<f64>::zeros((4, 3));
        for i in 0..4 {
            b.row_mut(i).assign(&g.ols.coefficients);
        }
        b[[1, 1]] = g.ols.ci_upper[1];
        b[[2, 1]] = g.ols.ci_upper[1] + 1e-9;
        b[[3, 2]] = g.ols.ci_lower[2] - 0.5;
        let rec = deviations_from_coefficients(b.view(), &g).unwrap();
        let flagged: Vec<(usize, usize)> = rec.iter().filter(|r| r.flagged).map(|r| (r.patient, r.dim)).collect();
        assert_eq!(flagged, vec![(2, 0), (3, 1)]);
        assert!(rec.iter().filter(|r| r.patient == 0).all(|r| r.delta == 0.0 && r.direction.is_none()));
        assert_eq!(rec[7].direction, Some(Direction::Negative));
    }
}
