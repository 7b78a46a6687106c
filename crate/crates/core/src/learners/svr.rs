//! Epsilon-SVR trained by SMO on the dual with second-order working set
//! selection.
//!
//! The dual has 2n variables: `a_i` (sign +1, linear term ε − y_i) and
//! `a*_i` (sign −1, linear term ε + y_i), with `Σ s_t a_t = 0` and
//! `0 ≤ a_t ≤ C`. The regression function is
//! `f(x) = Σ (a_i − a*_i) K(x_i, x) − ρ`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use crate::error::{Error, Result};

pub const KKT_TOL: f64 = 1e-3;
pub const MAX_ITER: usize = 100_000;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub kernel: Kernel,
    pub c: f64,
    pub epsilon: f64,
    /// Support vectors (rows with a nonzero dual coefficient).
    pub support: Array2<f64>,
    /// `a_i − a*_i` for each support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    /// Support vectors strictly inside (0, C).
    pub n_free: usize,
    pub iterations: usize,
}

pub fn fit(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    kernel: Kernel,
    c: f64,
    epsilon: f64,
) -> Result<SvrModel> {
    let n = y.len();
    if n == 0 {
        return Err(Error::Empty("no training rows".into()));
    }
    if !(c > 0.0) || !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "SVR needs C > 0 and epsilon >= 0, got C={c}, epsilon={epsilon}"
        )));
    }
    // Centre the targets so a shift in y lands in the bias exactly.
    let offset = y.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = y.iter().map(|v| v - offset).collect();
    let k = kernel.gram(x);
    let l = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let kk = |a: usize, b: usize| k[[a % n, b % n]];
    let mut alpha = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| {
            if t < n {
                epsilon - y[t]
            } else {
                epsilon + y[t - n]
            }
        })
        .collect();
    let qd: Vec<f64> = (0..l).map(|t| kk(t, t)).collect();

    let mut iter = 0;
    loop {
        // Working set selection.
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            if sign(t) > 0.0 {
                if alpha[t] < c && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i = t;
                }
            } else if alpha[t] > 0.0 && grad[t] >= gmax {
                gmax = grad[t];
                i = t;
            }
        }
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i != usize::MAX {
            let yi = sign(i);
            for t in 0..l {
                let qit = yi * sign(t) * kk(i, t);
                if sign(t) > 0.0 {
                    if alpha[t] > 0.0 {
                        let diff = gmax + grad[t];
                        if grad[t] >= gmax2 {
                            gmax2 = grad[t];
                        }
                        if diff > 0.0 {
                            let quad = qd[i] + qd[t] - 2.0 * yi * qit;
                            let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                            if obj <= obj_min {
                                j = t;
                                obj_min = obj;
                            }
                        }
                    }
                } else if alpha[t] < c {
                    let diff = gmax - grad[t];
                    if -grad[t] >= gmax2 {
                        gmax2 = -grad[t];
                    }
                    if diff > 0.0 {
                        let quad = qd[i] + qd[t] + 2.0 * yi * qit;
                        let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= obj_min {
                            j = t;
                            obj_min = obj;
                        }
                    }
                }
            }
        }
        if gmax + gmax2 < KKT_TOL || j == usize::MAX {
            break;
        }
        if iter >= MAX_ITER {
            return Err(Error::NotConverged {
                solver: "svr-smo",
                iterations: iter,
            });
        }
        iter += 1;

        let (yi, yj) = (sign(i), sign(j));
        let qij = yi * yj * kk(i, j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if yi != yj {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += sign(t) * (yi * kk(t, i) * di + yj * kk(t, j) * dj);
        }
    }

    // Bias from free variables, else the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free_vars, mut sum_free) = (0usize, 0.0);
    for t in 0..l {
        let yg = sign(t) * grad[t];
        if alpha[t] >= c {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free_vars += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free_vars > 0 {
        sum_free / n_free_vars as f64
    } else {
        (ub + lb) / 2.0
    };

    let mut rows = Vec::new();
    let mut coef = Vec::new();
    let mut n_free = 0;
    for i in 0..n {
        let b = alpha[i] - alpha[i + n];
        if b != 0.0 {
            rows.push(i);
            coef.push(b);
            if b.abs() < c {
                n_free += 1;
            }
        }
    }
    let support = x
        .select(ndarray::Axis(0), &rows)
        .as_standard_layout()
        .to_owned();
    Ok(SvrModel {
        kernel,
        c,
        epsilon,
        support,
        coef,
        rho: rho - offset,
        n_free,
        iterations: iter,
    })
}

impl SvrModel {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let mut s = -self.rho;
        for (row, b) in self.support.rows().into_iter().zip(&self.coef) {
            s += b * self
                .kernel
                .eval(row.as_slice().expect("standard layout"), x);
        }
        s
    }
}
