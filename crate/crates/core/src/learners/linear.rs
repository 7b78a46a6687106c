//! Elastic net by cyclic coordinate descent.
//!
//! Minimises `(1/2n)‖y − Xβ − b‖² + λ(r‖β‖₁ + (1 − r)/2 ‖β‖²)` with the
//! intercept `b` left unpenalised (handled by centring). Lasso is `r = 1`.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOL: f64 = 1e-8;
pub const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub lambda: f64,
    pub l1_ratio: f64,
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub sweeps: usize,
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// `max_j |x_jᵀ(y − ȳ)| / n` on centred columns; any λ at or above this with
/// `l1_ratio = 1` gives β = 0.
pub fn lambda_max(x: ArrayView2<'_, f64>, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let ym = y.iter().sum::<f64>() / n;
    x.columns()
        .into_iter()
        .map(|c| {
            let cm = c.sum() / n;
            c.iter()
                .zip(y)
                .map(|(a, b)| (a - cm) * (b - ym))
                .sum::<f64>()
                .abs()
                / n
        })
        .fold(0.0, f64::max)
}

pub fn fit(x: ArrayView2<'_, f64>, y: &[f64], lambda: f64, l1_ratio: f64) -> Result<LinearModel> {
    let (n, p) = x.dim();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("no training rows".into()));
    }
    if !(lambda >= 0.0) || !(0.0..=1.0).contains(&l1_ratio) {
        return Err(Error::InvalidArgument(format!(
            "elastic net needs lambda >= 0 and l1_ratio in [0, 1], got {lambda}, {l1_ratio}"
        )));
    }
    let nf = n as f64;
    let means: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / nf).collect();
    let ym = y.iter().sum::<f64>() / nf;
    // Column-major centred copy for cache-friendly sweeps.
    let cols: Vec<Vec<f64>> = x
        .columns()
        .into_iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    let sq: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf)
        .collect();
    let mut resid: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let mut beta = vec![0.0; p];
    let l1 = lambda * l1_ratio;
    let l2 = lambda * (1.0 - l1_ratio);

    let mut sweeps = 0;
    loop {
        if sweeps >= MAX_SWEEPS {
            return Err(Error::NotConverged {
                solver: "elastic-net-cd",
                iterations: sweeps,
            });
        }
        sweeps += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            let denom = sq[j] + l2;
            if denom <= 0.0 {
                continue;
            }
            let c = &cols[j];
            let rho = c.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / nf + sq[j] * beta[j];
            let new = soft_threshold(rho, l1) / denom;
            let delta = new - beta[j];
            if delta != 0.0 {
                for (r, a) in resid.iter_mut().zip(c) {
                    *r -= delta * a;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < TOL {
            break;
        }
    }
    let intercept = ym - beta.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearModel {
        lambda,
        l1_ratio,
        coef: beta,
        intercept,
        sweeps,
    })
}

impl LinearModel {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn nonzero(&self) -> usize {
        self.coef.iter().filter(|b| **b != 0.0).count()
    }

    /// Penalised objective at the stored coefficients.
    pub fn objective(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> f64 {
        objective(x, y, &self.coef, self.intercept, self.lambda, self.l1_ratio)
    }
}

pub fn objective(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    beta: &[f64],
    b0: f64,
    lambda: f64,
    r: f64,
) -> f64 {
    let n = y.len() as f64;
    let sse: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, t)| {
            let f = b0 + row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
            (t - f) * (t - f)
        })
        .sum();
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    sse / (2.0 * n) + lambda * (r * l1 + (1.0 - r) / 2.0 * l2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use ndarray::Array2;
    use rand::Rng as _;

    fn data(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut r = crate::rng::stream(seed, 0);
        let x = Array2::from_shape_fn((n, p), |_| r.random::<f64>() * 2.0 - 1.0);
        let y = x
            .rows()
            .into_iter()
            .map(|row| {
                0.5 + row
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (j as f64 - 1.0) * v)
                    .sum::<f64>()
                    + 0.1 * (r.random::<f64>() - 0.5)
            })
            .collect();
        (x, y)
    }

    /// Centred closed-form ridge: (XcᵀXc + nλI)⁻¹ Xcᵀ yc.
    fn ridge_oracle(x: &Array2<f64>, y: &[f64], lambda: f64) -> Vec<f64> {
        let (n, p) = x.dim();
        let mut xc = DMatrix::from_fn(n, p, |i, j| x[[i, j]]);
        for j in 0..p {
            let m = xc.column(j).mean();
            xc.column_mut(j).add_scalar_mut(-m);
        }
        let ym = y.iter().sum::<f64>() / n as f64;
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - ym));
        let a = xc.transpose() * &xc + DMatrix::identity(p, p) * (n as f64 * lambda);
        a.lu()
            .solve(&(xc.transpose() * yc))
            .unwrap()
            .iter()
            .copied()
            .collect()
    }

    #[test]
    fn ols_limit() {
        let (x, y) = data(40, 4, 1);
        let m = fit(x.view(), &y, 0.0, 0.5).unwrap();
        let o = ridge_oracle(&x, &y, 0.0);
        for (a, b) in m.coef.iter().zip(&o) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn ridge_limit() {
        let (x, y) = data(40, 4, 2);
        for lambda in [0.01, 0.3, 2.0] {
            let m = fit(x.view(), &y, lambda, 0.0).unwrap();
            let o = ridge_oracle(&x, &y, lambda);
            for (a, b) in m.coef.iter().zip(&o) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-6);
            }
            let ym = y.iter().sum::<f64>() / 40.0;
            let means: Vec<f64> = x.columns().into_iter().map(|c| c.mean().unwrap()).collect();
            let b0 = ym - o.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
            assert!(
                m.objective(x.view(), &y) <= objective(x.view(), &y, &o, b0, lambda, 0.0) + 1e-8
            );
        }
    }

    #[test]
    fn lambda_max_zeroes_everything() {
        let (x, y) = data(30, 5, 3);
        let lm = lambda_max(x.view(), &y);
        let m = fit(x.view(), &y, lm, 1.0).unwrap();
        assert!(m.coef.iter().all(|b| *b == 0.0));
        let ym = y.iter().sum::<f64>() / 30.0;
        assert_abs_diff_eq!(
            m.predict_one(&[0.3, 0.1, -0.2, 0.0, 0.9]),
            ym,
            epsilon = 1e-15
        );
        let m = fit(x.view(), &y, 0.9 * lm, 1.0).unwrap();
        assert!(m.nonzero() > 0);
    }

    #[test]
    fn single_feature_soft_threshold() {
        let (x, y) = data(25, 1, 4);
        let n = 25.0;
        let xm = x.column(0).mean().unwrap();
        let ym = y.iter().sum::<f64>() / n;
        let sxy: f64 = x
            .column(0)
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - xm) * (b - ym))
            .sum::<f64>()
            / n;
        let sxx: f64 = x.column(0).iter().map(|a| (a - xm) * (a - xm)).sum::<f64>() / n;
        for lambda in [0.0, 0.01, 0.1, 1.0] {
            let m = fit(x.view(), &y, lambda, 1.0).unwrap();
            let oracle = sxy.signum() * (sxy.abs() - lambda).max(0.0) / sxx;
            assert_abs_diff_eq!(m.coef[0], oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_negative_lambda() {
        assert!(matches!(
            fit(ndarray::array![[1.0], [2.0]].view(), &[1.0, 2.0], -1.0, 0.5),
            Err(Error::InvalidArgument(_))
        ));
    }
}
