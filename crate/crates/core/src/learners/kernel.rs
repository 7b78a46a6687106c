use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// Kernel functions. The polynomial kernel uses offset 1:
/// `(γ⟨x, x'⟩ + 1)^degree`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
    Polynomial { gamma: f64, degree: u32 },
}

pub const POLY_OFFSET: f64 = 1.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            Kernel::Polynomial { gamma, degree } => {
                (gamma * dot(a, b) + POLY_OFFSET).powi(degree as i32)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Rbf { .. } => "rbf",
            Kernel::Polynomial { .. } => "polynomial",
        }
    }

    /// Gram matrix `K[i][j] = k(x_i, x_j)`.
    pub fn gram(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let x = x.as_standard_layout();
        let n = x.nrows();
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            let xi = x.row(i);
            let xi = xi.as_slice().expect("standard layout");
            for j in 0..=i {
                let v = self.eval(xi, x.row(j).as_slice().expect("standard layout"));
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rbf_self_is_one() {
        let k = Kernel::Rbf { gamma: 0.7 };
        assert_eq!(k.eval(&[1.0, -2.0, 3.0], &[1.0, -2.0, 3.0]), 1.0);
        assert_abs_diff_eq!(k.eval(&[0.0], &[2.0]), (-2.8f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn polynomial_matches_formula() {
        let k = Kernel::Polynomial {
            gamma: 0.5,
            degree: 3,
        };
        // <x, x'> = 1*3 + 2*(-1) = 1
        assert_abs_diff_eq!(
            k.eval(&[1.0, 2.0], &[3.0, -1.0]),
            1.5f64.powi(3),
            epsilon = 1e-15
        );
        assert_eq!(Kernel::Linear.eval(&[1.0, 2.0], &[3.0, -1.0]), 1.0);
    }

    #[test]
    fn gram_is_symmetric() {
        let x = ndarray::array![[0.0, 1.0], [2.0, 0.5], [-1.0, 0.0]];
        let g = Kernel::Rbf { gamma: 0.1 }.gram(x.view());
        assert_eq!(g, g.t());
        assert!(g.diag().iter().all(|&v| v == 1.0));
    }
}
