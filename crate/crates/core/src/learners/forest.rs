//! Random forest regression: bootstrap-resampled trees with per-node feature
//! subsampling (`max(1, p/3)` features by default), averaged.

use ndarray::ArrayView2;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cart::{self, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_TREES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub seed: u64,
    pub max_features: usize,
    pub trees: Vec<Tree>,
}

pub fn default_max_features(p: usize) -> usize {
    (p / 3).max(1)
}

pub fn fit(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    n_trees: usize,
    max_features: Option<usize>,
    seed: u64,
) -> Result<Forest> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "random forest needs n >= 2, got {n}"
        )));
    }
    if n_trees == 0 {
        return Err(Error::InvalidArgument(
            "random forest needs at least one tree".into(),
        ));
    }
    let p = x.ncols();
    let mtry = max_features
        .unwrap_or_else(|| default_max_features(p))
        .clamp(1, p);
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, t as u64);
            let rows: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
            cart::grow(x, y, rows, TreeParams::default(), Some(mtry), Some(r))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        seed,
        max_features: mtry,
        trees,
    })
}

impl Forest {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_one(x)).sum::<f64>() / self.trees.len() as f64
    }
}
