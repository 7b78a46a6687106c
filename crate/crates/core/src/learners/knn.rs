//! k-nearest-neighbour regression.
//!
//! Neighbours are ordered by (distance, training index), so equal distances
//! resolve towards the lower index. Distance weighting uses 1/d; when any
//! selected neighbour sits at distance zero the prediction is the mean of
//! those exact matches.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Manhattan,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

impl fmt::Display for Weights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weights::Uniform => "uniform",
            Weights::Distance => "distance",
        })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            _ => Err(Error::InvalidArgument(format!("unknown metric `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub weights: Weights,
    pub metric: Metric,
    pub x_train: Array2<f64>,
    pub y_train: Vec<f64>,
}

pub fn fit(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    k: usize,
    weights: Weights,
    metric: Metric,
) -> Result<KnnModel> {
    if k == 0 || k > y.len() {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={}, got {k}",
            y.len()
        )));
    }
    Ok(KnnModel {
        k,
        weights,
        metric,
        x_train: x.as_standard_layout().to_owned(),
        y_train: y.to_vec(),
    })
}

impl KnnModel {
    /// The k nearest training rows as (distance, index).
    pub fn neighbours(&self, x: &[f64]) -> Vec<(f64, usize)> {
        let mut d: Vec<(f64, usize)> = self
            .x_train
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    self.metric
                        .distance(r.as_slice().expect("standard layout"), x),
                    i,
                )
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let nb = self.neighbours(x);
        match self.weights {
            Weights::Uniform => {
                nb.iter().map(|&(_, i)| self.y_train[i]).sum::<f64>() / nb.len() as f64
            }
            Weights::Distance => {
                let exact: Vec<f64> = nb
                    .iter()
                    .filter(|(d, _)| *d == 0.0)
                    .map(|&(_, i)| self.y_train[i])
                    .collect();
                if !exact.is_empty() {
                    return exact.iter().sum::<f64>() / exact.len() as f64;
                }
                let (mut num, mut den) = (0.0, 0.0);
                for &(d, i) in &nb {
                    num += self.y_train[i] / d;
                    den += 1.0 / d;
                }
                num / den
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn four() -> (Array2<f64>, Vec<f64>) {
        (
            array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]],
            vec![1.0, 2.0, 4.0, 8.0],
        )
    }

    #[test]
    fn one_nn_recalls_training_target() {
        let (x, y) = four();
        for w in [Weights::Uniform, Weights::Distance] {
            let m = fit(x.view(), &y, 1, w, Metric::Euclidean).unwrap();
            for (r, t) in x.rows().into_iter().zip(&y) {
                assert_eq!(m.predict_one(r.as_slice().unwrap()), *t);
            }
        }
    }

    #[test]
    fn k_equals_n_is_mean() {
        let (x, y) = four();
        let m = fit(x.view(), &y, 4, Weights::Uniform, Metric::Manhattan).unwrap();
        assert_eq!(m.predict_one(&[10.0, -4.0]), 3.75);
    }

    #[test]
    fn hand_k2() {
        let (x, y) = four();
        // Query (0.6, 0.2): euclidean distances 0.632, 0.447, 1.90, 3.74.
        let m = fit(x.view(), &y, 2, Weights::Uniform, Metric::Euclidean).unwrap();
        assert_eq!(m.predict_one(&[0.6, 0.2]), 1.5);
        let m = fit(x.view(), &y, 2, Weights::Distance, Metric::Euclidean).unwrap();
        let (d0, d1) = (0.4f64.sqrt(), 0.2f64.sqrt());
        assert_abs_diff_eq!(
            m.predict_one(&[0.6, 0.2]),
            (1.0 / d0 + 2.0 / d1) / (1.0 / d0 + 1.0 / d1),
            epsilon = 1e-14
        );
        // Manhattan: 0.8, 0.6, 2.4, 5.2 → same pair.
        let m = fit(x.view(), &y, 2, Weights::Uniform, Metric::Manhattan).unwrap();
        assert_eq!(m.predict_one(&[0.6, 0.2]), 1.5);
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        let x = array![[1.0], [-1.0], [3.0]];
        let m = fit(
            x.view(),
            &[10.0, 20.0, 30.0],
            1,
            Weights::Uniform,
            Metric::Euclidean,
        )
        .unwrap();
        assert_eq!(m.predict_one(&[0.0]), 10.0);
    }

    #[test]
    fn uniform_permutation_invariant() {
        let (x, y) = four();
        let a = fit(x.view(), &y, 3, Weights::Uniform, Metric::Euclidean).unwrap();
        let order = [2, 0, 3, 1];
        let xp = x.select(ndarray::Axis(0), &order);
        let yp: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        let b = fit(xp.view(), &yp, 3, Weights::Uniform, Metric::Euclidean).unwrap();
        for q in [[0.2, 0.1], [2.0, 2.0], [-1.0, 5.0]] {
            assert_eq!(a.predict_one(&q), b.predict_one(&q));
        }
    }

    #[test]
    fn k_too_large() {
        let (x, y) = four();
        assert!(fit(x.view(), &y, 5, Weights::Uniform, Metric::Euclidean).is_err());
    }
}
