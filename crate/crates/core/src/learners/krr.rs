//! Kernel ridge regression without intercept: `α = (K + λI)⁻¹ y`,
//! `f(x) = Σ α_i K(x_i, x)`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use crate::error::{Error, Result};
use crate::linalg::{max_abs_residual, spd_solve};

pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrrModel {
    pub kernel: Kernel,
    pub lambda: f64,
    pub x_train: Array2<f64>,
    pub dual: Vec<f64>,
    /// trace(K (K + λI)⁻¹).
    pub effective_dof: f64,
    /// ‖(K + λI)α − y‖∞ at fit time.
    pub residual: f64,
}

pub fn fit(x: ArrayView2<'_, f64>, y: &[f64], kernel: Kernel, lambda: f64) -> Result<KrrModel> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "KRR needs lambda > 0, got {lambda}"
        )));
    }
    let n = y.len();
    let mut a = kernel.gram(x);
    for i in 0..n {
        a[[i, i]] += lambda;
    }
    let (dual, ch) = spd_solve(a.view(), y, RESIDUAL_TOL)?;
    let residual = max_abs_residual(a.view(), &dual, y);
    // K(K+λI)⁻¹ = I − λ(K+λI)⁻¹
    let effective_dof = n as f64 - lambda * ch.inverse_trace();
    Ok(KrrModel {
        kernel,
        lambda,
        x_train: x.as_standard_layout().to_owned(),
        dual,
        effective_dof,
        residual,
    })
}

impl KrrModel {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.x_train
            .rows()
            .into_iter()
            .zip(&self.dual)
            .map(|(r, a)| a * self.kernel.eval(r.as_slice().expect("standard layout"), x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn hand_two_by_two() {
        // Orthonormal rows give K = I under the linear kernel.
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let m = fit(x.view(), &[2.0, 4.0], Kernel::Linear, 1.0).unwrap();
        assert_eq!(m.dual, vec![1.0, 2.0]);
        assert_abs_diff_eq!(m.effective_dof, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn interpolation_limit() {
        let x = array![[0.0], [0.4], [1.1], [2.0], [3.5]];
        let y = [1.0, -0.5, 0.2, 2.0, 0.0];
        let m = fit(x.view(), &y, Kernel::Rbf { gamma: 1.0 }, 1e-10).unwrap();
        for (r, t) in x.rows().into_iter().zip(y) {
            assert_abs_diff_eq!(m.predict_one(r.as_slice().unwrap()), t, epsilon = 1e-4);
        }
        assert!(m.residual <= RESIDUAL_TOL);
    }

    #[test]
    fn linear_kernel_matches_ridge_oracle() {
        // Dual ridge without intercept equals primal (XᵀX + λI)⁻¹Xᵀy.
        let x = array![
            [1.0, 0.5],
            [-0.3, 2.0],
            [0.7, -1.0],
            [2.0, 0.1],
            [-1.2, -0.4]
        ];
        let beta = [1.5, -0.75];
        let y: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| r[0] * beta[0] + r[1] * beta[1])
            .collect();
        let lambda = 1e-9;
        let m = fit(x.view(), &y, Kernel::Linear, lambda).unwrap();
        let nx = nalgebra::DMatrix::from_fn(5, 2, |i, j| x[[i, j]]);
        let ny = nalgebra::DVector::from_vec(y.clone());
        let a = nx.transpose() * &nx + nalgebra::DMatrix::identity(2, 2) * lambda;
        let b = a.lu().solve(&(nx.transpose() * ny)).unwrap();
        for q in [[0.3, 0.3], [5.0, -2.0], [-1.0, 4.0]] {
            let oracle = q[0] * b[0] + q[1] * b[1];
            assert_abs_diff_eq!(m.predict_one(&q), oracle, epsilon = 1e-6);
        }
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let x = array![[1.0]];
        assert!(fit(x.view(), &[1.0], Kernel::Linear, 0.0).is_err());
    }
}
