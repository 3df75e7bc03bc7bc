//! Small dense kernels for symmetric positive definite systems.
//!
//! The regression problems here are at most a few dozen parameters wide, so a
//! plain Cholesky factorization is both fast and sufficiently accurate.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::{Error, Result};

/// Relative pivot tolerance below which a Gram matrix is treated as singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub fn new(a: ArrayView2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Shape(format!("cholesky of {}x{}", n, a.ncols())));
        }
        let scale = (0..n).map(|i| a[[i, i]].abs()).fold(0.0_f64, f64::max);
        let tol = PIVOT_TOL * scale.max(f64::MIN_POSITIVE);
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut diag = a[[j, j]];
            for k in 0..j {
                diag -= l[[j, k]] * l[[j, k]];
            }
            if !(diag > tol) {
                return Err(Error::Singular(format!(
                    "pivot {j} is {diag:.3e} (tolerance {tol:.3e})"
                )));
            }
            let ljj = diag.sqrt();
            l[[j, j]] = ljj;
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.dim();
        let mut x = b.to_owned();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[[i, k]] * x[k];
            }
            x[i] = s / self.l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[[k, i]] * x[k];
            }
            x[i] = s / self.l[[i, i]];
        }
        x
    }

    pub fn inverse(&self) -> Array2<f64> {
        let n = self.dim();
        let mut inv = Array2::<f64>::zeros((n, n));
        let mut e = Array1::<f64>::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = self.solve(e.view());
            inv.column_mut(j).assign(&col);
        }
        // symmetrize away round-off
        for i in 0..n {
            for j in (i + 1)..n {
                let m = 0.5 * (inv[[i, j]] + inv[[j, i]]);
                inv[[i, j]] = m;
                inv[[j, i]] = m;
            }
        }
        inv
    }
}

/// Prepends a column of ones.
pub fn with_intercept(x: ArrayView2<f64>) -> Array2<f64> {
    let (n, q) = x.dim();
    let mut out = Array2::<f64>::ones((n, q + 1));
    out.slice_mut(ndarray::s![.., 1..]).assign(&x);
    out
}
