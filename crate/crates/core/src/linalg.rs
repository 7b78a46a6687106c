//! Small dense Cholesky solver for symmetric positive-definite systems.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Diagonal jitter ladder tried when a factorisation breaks down.
const JITTER: [f64; 6] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8];

#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
    pub jitter: f64,
}

impl Cholesky {
    fn try_factor(a: ArrayView2<'_, f64>, jitter: f64) -> Option<Array2<f64>> {
        let n = a.nrows();
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]] + jitter;
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[[j, j]] = d;
            for i in j + 1..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / d;
            }
        }
        Some(l)
    }

    /// Factor `a`, escalating diagonal jitter from 0 to 1e-8 on breakdown.
    pub fn factor(a: ArrayView2<'_, f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        for &jitter in &JITTER {
            if let Some(l) = Self::try_factor(a, jitter) {
                return Ok(Cholesky { l, jitter });
            }
        }
        Err(Error::Singular(format!(
            "matrix not positive definite after jitter {}",
            JITTER[JITTER.len() - 1]
        )))
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let l = &self.l;
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= l[[i, k]] * z[k];
            }
            z[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= l[[k, i]] * z[k];
            }
            z[i] = s / l[[i, i]];
        }
        z
    }

    /// trace(A⁻¹) = ‖L⁻¹‖²_F.
    pub fn inverse_trace(&self) -> f64 {
        let n = self.dim();
        let l = &self.l;
        let mut total = 0.0;
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0 / l[[j, j]];
            total += col[j] * col[j];
            for i in j + 1..n {
                let mut s = 0.0;
                for k in j..i {
                    s -= l[[i, k]] * col[k];
                }
                col[i] = s / l[[i, i]];
                total += col[i] * col[i];
            }
        }
        total
    }
}

pub fn matvec(a: ArrayView2<'_, f64>, x: &[f64]) -> Vec<f64> {
    a.dot(&Array1::from(x.to_vec())).to_vec()
}

pub fn max_abs_residual(a: ArrayView2<'_, f64>, x: &[f64], b: &[f64]) -> f64 {
    matvec(a, x)
        .iter()
        .zip(b)
        .map(|(ax, b)| (ax - b).abs())
        .fold(0.0, f64::max)
}

/// Solve `a x = b` for SPD `a` with up to three rounds of iterative
/// refinement; fails if the residual ends above `tol · max(1, ‖b‖∞)`.
pub fn spd_solve(a: ArrayView2<'_, f64>, b: &[f64], tol: f64) -> Result<(Vec<f64>, Cholesky)> {
    let ch = Cholesky::factor(a)?;
    let mut x = ch.solve(b);
    let bound = tol * b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for _ in 0..3 {
        let r: Vec<f64> = b.iter().zip(matvec(a, &x)).map(|(b, ax)| b - ax).collect();
        if r.iter().all(|v| *v == 0.0) {
            break;
        }
        let dx = ch.solve(&r);
        x.iter_mut().zip(dx).for_each(|(x, d)| *x += d);
    }
    let res = max_abs_residual(a, &x, b);
    if res <= bound {
        Ok((x, ch))
    } else {
        Err(Error::Singular(format!(
            "linear solve residual {res:.3e} exceeds {bound:.3e}"
        )))
    }
}
