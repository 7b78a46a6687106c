//! Regression learners and their fitted forms.

pub mod cart;
pub mod forest;
pub mod kernel;
pub mod knn;
pub mod krr;
pub mod linear;
pub mod svr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::audit;
use crate::error::{Error, Result};

pub use cart::{Tree, TreeParams};
pub use forest::Forest;
pub use kernel::Kernel;
pub use knn::{KnnModel, Metric, Weights};
pub use krr::KrrModel;
pub use linear::LinearModel;
pub use svr::SvrModel;

/// Algorithm tag plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Predicts the training mean.
    Mean,
    ElasticNet {
        alpha: f64,
        l1_ratio: f64,
    },
    Lasso {
        alpha: f64,
    },
    KernelRidge {
        alpha: f64,
        kernel: Kernel,
    },
    Svm {
        c: f64,
        epsilon: f64,
        gamma: f64,
    },
    Cart(TreeParams),
    Knn {
        k: usize,
        weights: Weights,
        metric: Metric,
    },
    RandomForest {
        n_trees: usize,
        max_features: Option<usize>,
        seed: u64,
    },
}

impl ModelSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ModelSpec::Mean => "mean",
            ModelSpec::ElasticNet { .. } => "elastic_net",
            ModelSpec::Lasso { .. } => "lasso",
            ModelSpec::KernelRidge { .. } => "kernel_ridge",
            ModelSpec::Svm { .. } => "svm",
            ModelSpec::Cart(_) => "cart",
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::RandomForest { .. } => "random_forest",
        }
    }

    pub fn fit(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> Result<FittedModel> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::Empty("no training rows".into()));
        }
        audit::count_fit();
        let p = x.ncols();
        Ok(match *self {
            ModelSpec::Mean => FittedModel::Constant {
                value: y.iter().sum::<f64>() / y.len() as f64,
                n_features: p,
            },
            ModelSpec::ElasticNet { alpha, l1_ratio } => {
                FittedModel::Linear(linear::fit(x, y, alpha, l1_ratio)?)
            }
            ModelSpec::Lasso { alpha } => FittedModel::Linear(linear::fit(x, y, alpha, 1.0)?),
            ModelSpec::KernelRidge { alpha, kernel } => {
                FittedModel::KernelRidge(krr::fit(x, y, kernel, alpha)?)
            }
            ModelSpec::Svm { c, epsilon, gamma } => {
                FittedModel::Svm(svr::fit(x, y, Kernel::Rbf { gamma }, c, epsilon)?)
            }
            ModelSpec::Cart(params) => FittedModel::Cart(cart::fit(x, y, params)?),
            ModelSpec::Knn { k, weights, metric } => {
                FittedModel::Knn(knn::fit(x, y, k, weights, metric)?)
            }
            ModelSpec::RandomForest {
                n_trees,
                max_features,
                seed,
            } => FittedModel::RandomForest(forest::fit(x, y, n_trees, max_features, seed)?),
        })
    }
}

/// Learned state of any model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum FittedModel {
    Constant {
        value: f64,
        n_features: usize,
    },
    Linear(LinearModel),
    KernelRidge(KrrModel),
    Svm(SvrModel),
    Cart(Tree),
    Knn(KnnModel),
    RandomForest(Forest),
    /// Unweighted mean of member predictions.
    Averaged {
        members: Vec<FittedModel>,
    },
    /// Lasso meta-model over base predictions.
    Stacked {
        bases: Vec<FittedModel>,
        meta: LinearModel,
    },
}

impl FittedModel {
    pub fn n_features(&self) -> usize {
        match self {
            FittedModel::Constant { n_features, .. } => *n_features,
            FittedModel::Linear(m) => m.coef.len(),
            FittedModel::KernelRidge(m) => m.x_train.ncols(),
            FittedModel::Svm(m) => m.support.ncols(),
            FittedModel::Cart(t) => t.n_features,
            FittedModel::Knn(m) => m.x_train.ncols(),
            FittedModel::RandomForest(f) => f.trees.first().map_or(0, |t| t.n_features),
            FittedModel::Averaged { members } => members.first().map_or(0, |m| m.n_features()),
            FittedModel::Stacked { bases, .. } => bases.first().map_or(0, |m| m.n_features()),
        }
    }

    /// Prediction for one row; the caller guarantees the width.
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        match self {
            FittedModel::Constant { value, .. } => *value,
            FittedModel::Linear(m) => m.predict_one(x),
            FittedModel::KernelRidge(m) => m.predict_one(x),
            FittedModel::Svm(m) => m.predict_one(x),
            FittedModel::Cart(t) => t.predict_one(x),
            FittedModel::Knn(m) => m.predict_one(x),
            FittedModel::RandomForest(f) => f.predict_one(x),
            FittedModel::Averaged { members } => {
                members.iter().map(|m| m.predict_one(x)).sum::<f64>() / members.len() as f64
            }
            FittedModel::Stacked { bases, meta } => {
                let z: Vec<f64> = bases.iter().map(|m| m.predict_one(x)).collect();
                meta.predict_one(&z)
            }
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        let x = x.as_standard_layout();
        Ok(x.rows()
            .into_iter()
            .map(|r| self.predict_one(r.as_slice().expect("standard layout")))
            .collect())
    }

    /// Effective parameter count used by AIC/BIC and reduced χ².
    ///
    /// Linear: nonzero coefficients + intercept. Kernel ridge:
    /// trace(K(K+λI)⁻¹). SVR: free support vectors + bias. CART: leaves.
    /// kNN: n/k. Forest: mean leaves per tree. Averaged: mean over members.
    /// Stacked: nonzero meta coefficients + intercept + the counts of the
    /// bases those coefficients select.
    pub fn effective_params(&self) -> f64 {
        match self {
            FittedModel::Constant { .. } => 1.0,
            FittedModel::Linear(m) => m.nonzero() as f64 + 1.0,
            FittedModel::KernelRidge(m) => m.effective_dof,
            FittedModel::Svm(m) => m.n_free as f64 + 1.0,
            FittedModel::Cart(t) => t.n_leaves() as f64,
            FittedModel::Knn(m) => m.y_train.len() as f64 / m.k as f64,
            FittedModel::RandomForest(f) => {
                f.trees.iter().map(|t| t.n_leaves() as f64).sum::<f64>() / f.trees.len() as f64
            }
            FittedModel::Averaged { members } => {
                members.iter().map(|m| m.effective_params()).sum::<f64>() / members.len() as f64
            }
            FittedModel::Stacked { bases, meta } => {
                let selected: f64 = bases
                    .iter()
                    .zip(&meta.coef)
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(b, _)| b.effective_params())
                    .sum();
                meta.nonzero() as f64 + 1.0 + selected
            }
        }
    }
}

/// Unweighted average of already fitted models.
pub fn averaged(members: Vec<FittedModel>) -> Result<FittedModel> {
    if members.is_empty() {
        return Err(Error::Empty("averaging needs at least one model".into()));
    }
    let p = members[0].n_features();
    if let Some(m) = members.iter().find(|m| m.n_features() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: m.n_features(),
        });
    }
    Ok(FittedModel::Averaged { members })
}
