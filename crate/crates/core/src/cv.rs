//! Fold plans, grid search, averaged and stacked ensembles, and nested cross
//! validation with in-fold fitting of every standardiser, response
//! transform and model.
//!
//! All index sets refer to rows of the [`Dataset`] handed to the driver.
//! Each fit is logged to an optional [`FitAudit`] together with the rows its
//! output is evaluated on.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{AuditCtx, FitAudit, FitTarget};
use crate::data::Standardiser;
use crate::error::{Error, Result};
use crate::learners::{self, FittedModel, Kernel, Metric, ModelSpec, TreeParams, Weights};
use crate::metrics::{self, KsReference, MetricsReport};
use crate::rng;
use crate::transform::{FittedTransform, TransformKind};

/// Raw predictors, raw response and predictor names.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if names.len() != x.ncols() {
            return Err(Error::DimensionMismatch {
                expected: x.ncols(),
                got: names.len(),
            });
        }
        Ok(Dataset { x, y, names })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn rows(&self, idx: &[usize]) -> Array2<f64> {
        self.x.select(Axis(0), idx)
    }

    fn targets(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.y[i]).collect()
    }
}

// ---------------------------------------------------------------------------
// Folds

/// Outer test folds and, per outer fold, inner validation folds that
/// partition the outer training rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n: usize,
    pub k_out: usize,
    pub k_in: usize,
    pub seed: u64,
    pub outer: Vec<Vec<usize>>,
    pub inner: Vec<Vec<Vec<usize>>>,
}

/// Shuffled balanced partition of `idx` into `k` sorted folds; the first
/// `len % k` folds get one extra row.
pub fn partition(idx: &[usize], k: usize, seed: u64, stream: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    if idx.len() < k {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} rows into {k} folds",
            idx.len()
        )));
    }
    let mut shuffled = idx.to_vec();
    shuffled.shuffle(&mut rng::stream(seed, stream));
    let (base, extra) = (idx.len() / k, idx.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = shuffled[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

/// Rows of `all` not in `fold`, ascending. Both inputs must be sorted.
pub fn complement(all: &[usize], fold: &[usize]) -> Vec<usize> {
    all.iter()
        .copied()
        .filter(|i| fold.binary_search(i).is_err())
        .collect()
}

pub fn make_folds(n: usize, k_out: usize, k_in: usize, seed: u64) -> Result<FoldPlan> {
    if k_in < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 inner folds, got {k_in}"
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let outer = partition(&all, k_out, seed, 0)?;
    let inner = outer
        .iter()
        .enumerate()
        .map(|(f, test)| partition(&complement(&all, test), k_in, seed, 1 + f as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldPlan {
        n,
        k_out,
        k_in,
        seed,
        outer,
        inner,
    })
}

impl FoldPlan {
    pub fn outer_train(&self, fold: usize) -> Vec<usize> {
        complement(&(0..self.n).collect::<Vec<_>>(), &self.outer[fold])
    }
}

// ---------------------------------------------------------------------------
// Grids

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Training-mean baseline.
    Mean,
    ElasticNet,
    KernelRidge,
    Svm,
    Cart,
    Knn,
    #[serde(rename = "Averaged")]
    Averaged,
    #[serde(rename = "Stacked")]
    Stacked,
}

impl ModelKind {
    pub const BASES: [ModelKind; 5] = [
        ModelKind::ElasticNet,
        ModelKind::KernelRidge,
        ModelKind::Svm,
        ModelKind::Cart,
        ModelKind::Knn,
    ];

    /// The seven models reported for every transform.
    pub const REPORTED: [ModelKind; 7] = [
        ModelKind::ElasticNet,
        ModelKind::KernelRidge,
        ModelKind::Svm,
        ModelKind::Cart,
        ModelKind::Knn,
        ModelKind::Averaged,
        ModelKind::Stacked,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mean => "mean",
            ModelKind::ElasticNet => "elastic_net",
            ModelKind::KernelRidge => "kernel_ridge",
            ModelKind::Svm => "svm",
            ModelKind::Cart => "cart",
            ModelKind::Knn => "knn",
            ModelKind::Averaged => "Averaged",
            ModelKind::Stacked => "Stacked",
        }
    }

    pub fn is_ensemble(self) -> bool {
        matches!(self, ModelKind::Averaged | ModelKind::Stacked)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let all = [ModelKind::Mean].into_iter().chain(ModelKind::REPORTED);
        for k in all {
            if k.name().eq_ignore_ascii_case(s) {
                return Ok(k);
            }
        }
        Err(Error::InvalidArgument(format!("unknown model `{s}`")))
    }
}

/// Candidate lists per learner, searched in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub elastic_net: Vec<ModelSpec>,
    pub kernel_ridge: Vec<ModelSpec>,
    pub svm: Vec<ModelSpec>,
    pub cart: Vec<ModelSpec>,
    pub knn: Vec<ModelSpec>,
    /// Meta Lasso penalties for stacking.
    pub lasso_meta: Vec<f64>,
}

impl Default for GridSpec {
    /// The full reference grids.
    fn default() -> Self {
        let mut svm = Vec::new();
        for epsilon in [0.001, 0.01, 0.1, 0.5] {
            for c in [0.1, 1.0, 10.0, 100.0, 1000.0] {
                for gamma in [0.001, 0.01, 0.1, 0.5, 1.0] {
                    svm.push(ModelSpec::Svm { c, epsilon, gamma });
                }
            }
        }
        // Full kernel × α × γ × degree product; parameters a kernel ignores
        // produce duplicates, which the search skips.
        let mut kernel_ridge = Vec::new();
        for kernel in ["linear", "rbf", "polynomial"] {
            for alpha in [0.01, 0.1, 1.0, 10.0] {
                for gamma in [0.001, 0.01, 0.1] {
                    for degree in [2u32, 3] {
                        let kernel = match kernel {
                            "linear" => Kernel::Linear,
                            "rbf" => Kernel::Rbf { gamma },
                            _ => Kernel::Polynomial { gamma, degree },
                        };
                        kernel_ridge.push(ModelSpec::KernelRidge { alpha, kernel });
                    }
                }
            }
        }
        let mut elastic_net = Vec::new();
        for alpha in [0.0001, 0.001, 0.01, 0.1, 1.0] {
            for l1_ratio in [0.1, 0.5, 0.7, 0.9] {
                elastic_net.push(ModelSpec::ElasticNet { alpha, l1_ratio });
            }
        }
        let mut cart = Vec::new();
        for max_depth in [Some(3), Some(5), Some(10), Some(20), None] {
            for min_samples_split in [2, 5, 10] {
                for min_samples_leaf in [1, 2, 5] {
                    cart.push(ModelSpec::Cart(TreeParams {
                        max_depth,
                        min_samples_split,
                        min_samples_leaf,
                    }));
                }
            }
        }
        let mut knn = Vec::new();
        for k in [3, 5, 7, 9, 11, 15] {
            for weights in [Weights::Uniform, Weights::Distance] {
                for metric in [Metric::Euclidean, Metric::Manhattan] {
                    knn.push(ModelSpec::Knn { k, weights, metric });
                }
            }
        }
        GridSpec {
            elastic_net,
            kernel_ridge,
            svm,
            cart,
            knn,
            lasso_meta: vec![0.0001, 0.001, 0.01, 0.1, 1.0],
        }
    }
}

impl GridSpec {
    /// A small grid for quick runs and tests.
    pub fn quick() -> Self {
        GridSpec {
            elastic_net: vec![
                ModelSpec::ElasticNet {
                    alpha: 0.001,
                    l1_ratio: 0.5,
                },
                ModelSpec::ElasticNet {
                    alpha: 0.1,
                    l1_ratio: 0.5,
                },
            ],
            kernel_ridge: vec![
                ModelSpec::KernelRidge {
                    alpha: 0.1,
                    kernel: Kernel::Rbf { gamma: 0.1 },
                },
                ModelSpec::KernelRidge {
                    alpha: 1.0,
                    kernel: Kernel::Linear,
                },
            ],
            svm: vec![
                ModelSpec::Svm {
                    c: 10.0,
                    epsilon: 0.1,
                    gamma: 0.1,
                },
                ModelSpec::Svm {
                    c: 100.0,
                    epsilon: 0.01,
                    gamma: 0.1,
                },
            ],
            cart: vec![
                ModelSpec::Cart(TreeParams {
                    max_depth: Some(3),
                    min_samples_split: 2,
                    min_samples_leaf: 2,
                }),
                ModelSpec::Cart(TreeParams {
                    max_depth: Some(5),
                    min_samples_split: 5,
                    min_samples_leaf: 1,
                }),
            ],
            knn: vec![
                ModelSpec::Knn {
                    k: 5,
                    weights: Weights::Distance,
                    metric: Metric::Euclidean,
                },
                ModelSpec::Knn {
                    k: 9,
                    weights: Weights::Uniform,
                    metric: Metric::Manhattan,
                },
            ],
            lasso_meta: vec![0.001, 0.01, 0.1],
        }
    }

    pub fn for_kind(&self, kind: ModelKind) -> Vec<ModelSpec> {
        match kind {
            ModelKind::Mean => vec![ModelSpec::Mean],
            ModelKind::ElasticNet => self.elastic_net.clone(),
            ModelKind::KernelRidge => self.kernel_ridge.clone(),
            ModelKind::Svm => self.svm.clone(),
            ModelKind::Cart => self.cart.clone(),
            ModelKind::Knn => self.knn.clone(),
            ModelKind::Averaged | ModelKind::Stacked => Vec::new(),
        }
    }

    pub fn lasso_specs(&self) -> Vec<ModelSpec> {
        self.lasso_meta
            .iter()
            .map(|&alpha| ModelSpec::Lasso { alpha })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Pipelines

/// Standardiser, response transform and model fitted on the same rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub standardiser: Standardiser,
    pub transform: FittedTransform,
    pub model: FittedModel,
}

impl Pipeline {
    /// Prediction on the transformed response scale.
    pub fn predict_transformed(&self, x_raw: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        let z = self.standardiser.apply(x_raw)?;
        self.model.predict(z.view())
    }

    /// Prediction back on the original response scale.
    pub fn predict(&self, x_raw: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        Ok(self.transform.inverse(&self.predict_transformed(x_raw)?))
    }
}

/// Standardised predictors and transformed response for one training set.
struct Prepared {
    standardiser: Standardiser,
    transform: FittedTransform,
    x: Array2<f64>,
    y: Vec<f64>,
}

fn prepare(
    ds: &Dataset,
    rows: &[usize],
    kind: TransformKind,
    ctx: &AuditCtx<'_>,
    eval: &[usize],
) -> Result<Prepared> {
    let xr = ds.rows(rows);
    let standardiser = Standardiser::fit(xr.view(), &ds.names)?;
    ctx.log(FitTarget::Standardiser, "standardiser", rows, eval);
    let yr = ds.targets(rows);
    let transform = kind.fit(&yr)?;
    ctx.log(FitTarget::Transform, kind.name(), rows, eval);
    Ok(Prepared {
        x: standardiser.apply(xr.view())?,
        y: transform.forward(&yr)?,
        standardiser,
        transform,
    })
}

fn fit_logged(
    spec: &ModelSpec,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    ctx: &AuditCtx<'_>,
    rows: &[usize],
    eval: &[usize],
) -> Result<FittedModel> {
    let m = spec.fit(x, y)?;
    ctx.log(FitTarget::Model, spec.label(), rows, eval);
    Ok(m)
}

// ---------------------------------------------------------------------------
// Grid search

/// Inner-fold training sets prepared once and shared by all candidates.
struct InnerFold {
    train: Vec<usize>,
    valid: Vec<usize>,
    prep: Prepared,
    /// Standardised validation predictors.
    x_valid: Array2<f64>,
    /// Validation targets on the fold's transformed scale.
    y_valid: Vec<f64>,
}

fn prepare_inner(
    ds: &Dataset,
    train: &[usize],
    inner: &[Vec<usize>],
    kind: TransformKind,
    ctx: &AuditCtx<'_>,
) -> Result<Vec<InnerFold>> {
    inner
        .iter()
        .map(|valid| {
            let tr = complement(train, valid);
            let prep = prepare(ds, &tr, kind, ctx, valid)?;
            let x_valid = prep.standardiser.apply(ds.rows(valid).view())?;
            let y_valid = prep.transform.forward(&ds.targets(valid))?;
            Ok(InnerFold {
                train: tr,
                valid: valid.clone(),
                prep,
                x_valid,
                y_valid,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ModelSpec,
    pub best_index: usize,
    /// Mean inner validation RMSE per candidate; `None` when it failed.
    pub scores: Vec<Option<f64>>,
}

/// Index of the smallest score; ties go to the earliest candidate.
pub fn select_best(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if s.is_finite() && best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
    }
    best.map(|(i, _)| i)
}

fn dedup_specs(grid: &[ModelSpec]) -> Vec<ModelSpec> {
    let mut out: Vec<ModelSpec> = Vec::with_capacity(grid.len());
    for s in grid {
        if !out.contains(s) {
            out.push(s.clone());
        }
    }
    out
}

fn search(
    learner: &str,
    grid: &[ModelSpec],
    folds: &[InnerFold],
    ctx: &AuditCtx<'_>,
) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("empty grid for {learner}")));
    }
    let grid = dedup_specs(grid);
    let outcomes: Vec<std::result::Result<f64, String>> = grid
        .par_iter()
        .map(|spec| {
            let mut total = 0.0;
            for f in folds {
                let m = fit_logged(spec, f.prep.x.view(), &f.prep.y, ctx, &f.train, &f.valid)
                    .map_err(|e| format!("{spec:?}: {e}"))?;
                let pred = m.predict(f.x_valid.view()).map_err(|e| e.to_string())?;
                total += metrics::rmse(&f.y_valid, &pred).map_err(|e| e.to_string())?;
            }
            Ok(total / folds.len() as f64)
        })
        .collect();
    let scores: Vec<Option<f64>> = outcomes.iter().map(|o| o.as_ref().ok().copied()).collect();
    match select_best(&scores) {
        Some(i) => Ok(GridResult {
            best: grid[i].clone(),
            best_index: i,
            scores,
        }),
        None => Err(Error::GridExhausted {
            learner: learner.to_string(),
            causes: outcomes.into_iter().filter_map(|o| o.err()).collect(),
        }),
    }
}

/// Picks the candidate with the lowest mean inner-fold RMSE on the
/// transformed scale. `train` must be sorted and `inner` must partition it.
pub fn grid_search(
    ds: &Dataset,
    train: &[usize],
    inner: &[Vec<usize>],
    kind: TransformKind,
    learner: &str,
    grid: &[ModelSpec],
    audit: Option<&FitAudit>,
) -> Result<GridResult> {
    let ctx = AuditCtx::new(audit);
    let folds = prepare_inner(ds, train, inner, kind, &ctx)?;
    search(learner, grid, &folds, &ctx)
}

// ---------------------------------------------------------------------------
// Ensembles and the per-training-set fitting routine

/// Hyperparameters chosen for one model on one training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// One spec for a single learner; one per base for ensembles.
    pub specs: Vec<ModelSpec>,
    /// Meta Lasso penalty for the stacked model.
    pub meta_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedEntry {
    pub kind: ModelKind,
    pub selection: Selection,
    pub model: FittedModel,
}

/// Models fitted on one training set, sharing its standardiser and
/// transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSet {
    pub transform_kind: TransformKind,
    pub standardiser: Standardiser,
    pub transform: FittedTransform,
    pub entries: Vec<FittedEntry>,
    /// Out-of-fold base predictions used to fit the meta-model, on the
    /// transformed scale of this set; rows follow `train_rows`.
    pub meta_features: Option<Array2<f64>>,
    pub train_rows: Vec<usize>,
}

impl FittedSet {
    pub fn pipeline(&self, kind: ModelKind) -> Option<Pipeline> {
        self.entries
            .iter()
            .find(|e| e.kind == kind)
            .map(|e| Pipeline {
                standardiser: self.standardiser.clone(),
                transform: self.transform.clone(),
                model: e.model.clone(),
            })
    }
}

/// Fits every requested model on `train`, tuning with `inner` (a partition
/// of `train`). `eval` lists the rows the results will be scored on, for the
/// audit log only.
#[allow(clippy::too_many_arguments)]
pub fn fit_models(
    ds: &Dataset,
    train: &[usize],
    inner: &[Vec<usize>],
    kind: TransformKind,
    models: &[ModelKind],
    grids: &GridSpec,
    ctx: &AuditCtx<'_>,
    eval: &[usize],
) -> Result<FittedSet> {
    let outer = prepare(ds, train, kind, ctx, eval)?;
    let folds = prepare_inner(ds, train, inner, kind, ctx)?;

    let need_bases = models.iter().any(|m| m.is_ensemble());
    let mut tune: BTreeSet<ModelKind> = models
        .iter()
        .copied()
        .filter(|m| !m.is_ensemble())
        .collect();
    if need_bases {
        tune.extend(ModelKind::BASES);
    }
    let tuned: Vec<(ModelKind, ModelSpec)> = tune
        .iter()
        .map(|&k| Ok((k, search(k.name(), &grids.for_kind(k), &folds, ctx)?.best)))
        .collect::<Result<_>>()?;
    let spec_of = |k: ModelKind| {
        tuned
            .iter()
            .find(|(t, _)| *t == k)
            .map(|(_, s)| s.clone())
            .expect("tuned")
    };

    let refit: Vec<(ModelKind, FittedModel)> = tuned
        .par_iter()
        .map(|(k, s)| {
            Ok((
                *k,
                fit_logged(s, outer.x.view(), &outer.y, ctx, train, eval)?,
            ))
        })
        .collect::<Result<_>>()?;
    let model_of = |k: ModelKind| {
        refit
            .iter()
            .find(|(t, _)| *t == k)
            .map(|(_, m)| m.clone())
            .expect("refit")
    };

    let mut entries = Vec::new();
    let mut meta_features = None;
    for &m in models {
        let entry = match m {
            ModelKind::Averaged => FittedEntry {
                kind: m,
                selection: Selection {
                    specs: ModelKind::BASES.iter().map(|&b| spec_of(b)).collect(),
                    meta_alpha: None,
                },
                model: learners::averaged(ModelKind::BASES.iter().map(|&b| model_of(b)).collect())?,
            },
            ModelKind::Stacked => {
                let specs: Vec<ModelSpec> = ModelKind::BASES.iter().map(|&b| spec_of(b)).collect();
                let z = out_of_fold(train, &folds, &outer.transform, &specs, ctx)?;
                let (alpha, meta) = fit_meta(&z, &outer.y, train, &folds, grids, ctx, eval)?;
                meta_features = Some(z);
                FittedEntry {
                    kind: m,
                    selection: Selection {
                        specs,
                        meta_alpha: Some(alpha),
                    },
                    model: FittedModel::Stacked {
                        bases: ModelKind::BASES.iter().map(|&b| model_of(b)).collect(),
                        meta,
                    },
                }
            }
            _ => FittedEntry {
                kind: m,
                selection: Selection {
                    specs: vec![spec_of(m)],
                    meta_alpha: None,
                },
                model: model_of(m),
            },
        };
        entries.push(entry);
    }
    Ok(FittedSet {
        transform_kind: kind,
        standardiser: outer.standardiser,
        transform: outer.transform,
        entries,
        meta_features,
        train_rows: train.to_vec(),
    })
}

/// Stack with fixed base specs (no base tuning): out-of-fold meta-features
/// from `inner`, meta Lasso penalty tuned over `grids.lasso_meta`, bases
/// refit on all of `train`. Returns the pipeline and the meta-features.
pub fn fit_stacked(
    ds: &Dataset,
    train: &[usize],
    inner: &[Vec<usize>],
    kind: TransformKind,
    bases: &[ModelSpec],
    grids: &GridSpec,
    audit: Option<&FitAudit>,
) -> Result<(Pipeline, Array2<f64>)> {
    if bases.len() < 2 {
        return Err(Error::InvalidArgument(
            "stacking needs at least 2 base learners".into(),
        ));
    }
    let ctx = AuditCtx::new(audit);
    let outer = prepare(ds, train, kind, &ctx, &[])?;
    let folds = prepare_inner(ds, train, inner, kind, &ctx)?;
    let z = out_of_fold(train, &folds, &outer.transform, bases, &ctx)?;
    let (_, meta) = fit_meta(&z, &outer.y, train, &folds, grids, &ctx, &[])?;
    let fitted = bases
        .iter()
        .map(|s| fit_logged(s, outer.x.view(), &outer.y, &ctx, train, &[]))
        .collect::<Result<Vec<_>>>()?;
    let pipe = Pipeline {
        standardiser: outer.standardiser,
        transform: outer.transform,
        model: FittedModel::Stacked {
            bases: fitted,
            meta,
        },
    };
    Ok((pipe, z))
}

/// Meta-features for the rows of `train`: column b holds base b's
/// prediction from the inner fold that held the row out. Inner pipelines
/// predict on their own transformed scale; predictions are mapped back to
/// the original scale and forward through `target` so every row shares the
/// training set's scale.
fn out_of_fold(
    train: &[usize],
    folds: &[InnerFold],
    target: &FittedTransform,
    specs: &[ModelSpec],
    ctx: &AuditCtx<'_>,
) -> Result<Array2<f64>> {
    let mut z = Array2::<f64>::zeros((train.len(), specs.len()));
    let pos = |row: usize| train.binary_search(&row).expect("row in training set");
    let blocks: Vec<Vec<Vec<f64>>> = folds
        .par_iter()
        .map(|f| {
            specs
                .iter()
                .map(|s| {
                    let m = fit_logged(s, f.prep.x.view(), &f.prep.y, ctx, &f.train, &f.valid)?;
                    let raw = f.prep.transform.inverse(&m.predict(f.x_valid.view())?);
                    target.forward(&raw)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    for (f, cols) in folds.iter().zip(blocks) {
        for (b, col) in cols.iter().enumerate() {
            for (&row, &v) in f.valid.iter().zip(col) {
                z[[pos(row), b]] = v;
            }
        }
    }
    Ok(z)
}

/// Tunes the meta Lasso penalty on the inner folds of the meta-features and
/// refits it on all of them.
fn fit_meta(
    z: &Array2<f64>,
    y: &[f64],
    train: &[usize],
    folds: &[InnerFold],
    grids: &GridSpec,
    ctx: &AuditCtx<'_>,
    eval: &[usize],
) -> Result<(f64, learners::LinearModel)> {
    let pos = |rows: &[usize]| -> Vec<usize> {
        rows.iter()
            .map(|r| train.binary_search(r).expect("row in training set"))
            .collect()
    };
    let specs = grids.lasso_specs();
    let scores: Vec<Option<f64>> = specs
        .par_iter()
        .map(|s| {
            let mut total = 0.0;
            for f in folds {
                let (tr, va) = (pos(&f.train), pos(&f.valid));
                let ytr: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
                let yva: Vec<f64> = va.iter().map(|&i| y[i]).collect();
                let m = fit_logged(
                    s,
                    z.select(Axis(0), &tr).view(),
                    &ytr,
                    ctx,
                    &f.train,
                    &f.valid,
                )
                .ok()?;
                let p = m.predict(z.select(Axis(0), &va).view()).ok()?;
                total += metrics::rmse(&yva, &p).ok()?;
            }
            Some(total / folds.len() as f64)
        })
        .collect();
    let best = select_best(&scores).ok_or_else(|| Error::GridExhausted {
        learner: "lasso".into(),
        causes: vec!["every meta penalty failed".into()],
    })?;
    let alpha = grids.lasso_meta[best];
    match fit_logged(&specs[best], z.view(), y, ctx, train, eval)? {
        FittedModel::Linear(m) => Ok((alpha, m)),
        _ => unreachable!("lasso yields a linear model"),
    }
}

// ---------------------------------------------------------------------------
// Nested cross validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformScope {
    /// Transforms fitted on training rows only.
    #[default]
    InFold,
    /// Outer transforms fitted on every row, test fold included. Leaks by
    /// design; only for demonstrating the leak.
    AllRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub selection: Selection,
    /// RMSE on the fold's transformed scale.
    pub loss_transformed: f64,
    /// RMSE on the original response scale.
    pub loss_raw: f64,
    pub effective_params: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCvResult {
    pub model: ModelKind,
    pub folds: Vec<FoldOutcome>,
    /// Mean outer loss, transformed scale.
    pub e_transformed: f64,
    /// Mean outer loss, original scale.
    pub e_raw: f64,
    /// Out-of-fold predictions on the original scale, by row.
    pub oof_raw: Vec<f64>,
    /// Out-of-fold predictions on each fold's transformed scale, by row.
    pub oof_transformed: Vec<f64>,
    /// Metrics of the pooled out-of-fold predictions (original scale).
    pub pooled: MetricsReport,
    /// Metrics of the pooled predictions on the transformed scales.
    pub pooled_transformed: MetricsReport,
    /// Per-fold metrics averaged over folds (original scale).
    pub fold_averaged: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedCvReport {
    pub transform: TransformKind,
    pub scope: TransformScope,
    pub plan: FoldPlan,
    pub models: Vec<ModelCvResult>,
    /// Observed responses on each fold's transformed scale, by row.
    pub y_transformed: Vec<f64>,
}

impl NestedCvReport {
    pub fn get(&self, kind: ModelKind) -> Option<&ModelCvResult> {
        self.models.iter().find(|m| m.model == kind)
    }
}

#[derive(Debug, Clone)]
pub struct NestedCvOptions {
    pub transform: TransformKind,
    pub models: Vec<ModelKind>,
    pub grids: GridSpec,
    pub scope: TransformScope,
    pub ks_reference: KsReference,
}

impl NestedCvOptions {
    pub fn new(transform: TransformKind, models: &[ModelKind], grids: GridSpec) -> Self {
        NestedCvOptions {
            transform,
            models: models.to_vec(),
            grids,
            scope: TransformScope::InFold,
            ks_reference: KsReference::Fitted,
        }
    }
}

struct FoldRun {
    set: FittedSet,
    test: Vec<usize>,
    y_t: Vec<f64>,
    preds_t: Vec<Vec<f64>>,
}

fn run_fold(
    ds: &Dataset,
    plan: &FoldPlan,
    f: usize,
    opts: &NestedCvOptions,
    audit: Option<&FitAudit>,
) -> Result<FoldRun> {
    let ctx = AuditCtx::new(audit).in_outer(f);
    let test = plan.outer[f].clone();
    let train = plan.outer_train(f);
    let mut set = fit_models(
        ds,
        &train,
        &plan.inner[f],
        opts.transform,
        &opts.models,
        &opts.grids,
        &ctx,
        &test,
    )?;
    if opts.scope == TransformScope::AllRows {
        // Refit the outer transform on every row and the models on top of it.
        let all: Vec<usize> = (0..ds.len()).collect();
        let leaky = opts.transform.fit(&ds.y)?;
        ctx.log(FitTarget::Transform, opts.transform.name(), &all, &test);
        let xs = set.standardiser.apply(ds.rows(&train).view())?;
        let ys = leaky.forward(&ds.targets(&train))?;
        for e in set.entries.iter_mut() {
            if e.kind.is_ensemble() {
                return Err(Error::InvalidArgument(
                    "all-rows scope supports single learners only".into(),
                ));
            }
            e.model = fit_logged(&e.selection.specs[0], xs.view(), &ys, &ctx, &train, &test)?;
        }
        set.transform = leaky;
    }
    let y_t = set.transform.forward(&ds.targets(&test))?;
    let xs = set.standardiser.apply(ds.rows(&test).view())?;
    let preds_t = set
        .entries
        .iter()
        .map(|e| e.model.predict(xs.view()))
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldRun {
        set,
        test,
        y_t,
        preds_t,
    })
}

fn average_reports(reports: &[MetricsReport]) -> MetricsReport {
    let n = reports.len() as f64;
    let avg = |get: fn(&MetricsReport) -> Option<f64>| -> Option<f64> {
        let vals: Option<Vec<f64>> = reports.iter().map(get).collect();
        vals.map(|v| v.iter().sum::<f64>() / n)
    };
    let mut out = reports[0].clone();
    out.n = reports.iter().map(|r| r.n).sum();
    out.k = reports.iter().map(|r| r.k).sum::<f64>() / n;
    out.rmse = avg(|r| r.rmse);
    out.mae = avg(|r| r.mae);
    out.medae = avg(|r| r.medae);
    out.max_error = avg(|r| r.max_error);
    out.mape = avg(|r| r.mape);
    out.r2 = avg(|r| r.r2);
    out.adj_r2 = avg(|r| r.adj_r2);
    out.aic = avg(|r| r.aic);
    out.bic = avg(|r| r.bic);
    out.ccc = avg(|r| r.ccc);
    out.ks_stat = avg(|r| r.ks_stat);
    out.ks_pvalue = avg(|r| r.ks_pvalue);
    out.reduced_chi2 = avg(|r| r.reduced_chi2);
    out.undefined = reports.iter().flat_map(|r| r.undefined.clone()).collect();
    out
}

/// Nested cross validation over `plan`. Outer folds run in parallel; the
/// result does not depend on the number of worker threads.
pub fn nested_cv(
    ds: &Dataset,
    plan: &FoldPlan,
    opts: &NestedCvOptions,
    audit: Option<&FitAudit>,
) -> Result<NestedCvReport> {
    if plan.n != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            got: plan.n,
        });
    }
    if opts.models.is_empty() {
        return Err(Error::InvalidArgument("no models requested".into()));
    }
    let runs: Vec<FoldRun> = (0..plan.k_out)
        .into_par_iter()
        .map(|f| run_fold(ds, plan, f, opts, audit))
        .collect::<Result<_>>()?;

    let n = ds.len();
    let p = ds.x.ncols();
    let mut y_transformed = vec![f64::NAN; n];
    for r in &runs {
        for (&row, &v) in r.test.iter().zip(&r.y_t) {
            y_transformed[row] = v;
        }
    }
    let mut models = Vec::new();
    for (mi, &kind) in opts.models.iter().enumerate() {
        let mut oof_raw = vec![f64::NAN; n];
        let mut oof_t = vec![f64::NAN; n];
        let mut folds = Vec::new();
        let mut per_fold = Vec::new();
        let mut k_sum = 0.0;
        for (f, r) in runs.iter().enumerate() {
            let entry = &r.set.entries[mi];
            let pt = &r.preds_t[mi];
            let praw = r.set.transform.inverse(pt);
            let yraw = ds.targets(&r.test);
            let k = entry.model.effective_params();
            k_sum += k;
            for ((&row, &a), &b) in r.test.iter().zip(pt).zip(&praw) {
                oof_t[row] = a;
                oof_raw[row] = b;
            }
            folds.push(FoldOutcome {
                fold: f,
                selection: entry.selection.clone(),
                loss_transformed: metrics::rmse(&r.y_t, pt)?,
                loss_raw: metrics::rmse(&yraw, &praw)?,
                effective_params: k,
            });
            per_fold.push(metrics::full_report(&yraw, &praw, p, k, opts.ks_reference)?);
        }
        let kf = plan.k_out as f64;
        let k_mean = k_sum / kf;
        models.push(ModelCvResult {
            model: kind,
            e_transformed: folds.iter().map(|f| f.loss_transformed).sum::<f64>() / kf,
            e_raw: folds.iter().map(|f| f.loss_raw).sum::<f64>() / kf,
            pooled: metrics::full_report(&ds.y, &oof_raw, p, k_mean, opts.ks_reference)?,
            pooled_transformed: metrics::full_report(
                &y_transformed,
                &oof_t,
                p,
                k_mean,
                opts.ks_reference,
            )?,
            fold_averaged: average_reports(&per_fold),
            folds,
            oof_raw,
            oof_transformed: oof_t,
        });
    }
    Ok(NestedCvReport {
        transform: opts.transform,
        scope: opts.scope,
        plan: plan.clone(),
        models,
        y_transformed,
    })
}

/// Deployable models fitted on every row, tuned on `k_in` folds.
pub fn fit_final(
    ds: &Dataset,
    opts: &NestedCvOptions,
    k_in: usize,
    seed: u64,
    audit: Option<&FitAudit>,
) -> Result<FittedSet> {
    let all: Vec<usize> = (0..ds.len()).collect();
    let inner = partition(&all, k_in, seed, u64::MAX)?;
    fit_models(
        ds,
        &all,
        &inner,
        opts.transform,
        &opts.models,
        &opts.grids,
        &AuditCtx::new(audit),
        &[],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn linear_data(n: usize, noise: f64, seed: u64) -> Dataset {
        let mut r = rng::stream(seed, 0);
        let x = Array2::from_shape_fn((n, 3), |_| r.random::<f64>() * 4.0);
        let y = x
            .rows()
            .into_iter()
            .map(|row| {
                1.0 + 2.0 * row[0] - row[1]
                    + 0.5 * row[2]
                    + noise * r.sample::<f64, _>(StandardNormal)
            })
            .collect();
        Dataset::new(x, y, vec!["a".into(), "b".into(), "c".into()]).unwrap()
    }

    #[test]
    fn fold_sizes() {
        let p = make_folds(10, 5, 2, 1).unwrap();
        assert!(p.outer.iter().all(|f| f.len() == 2));
        let p = make_folds(96, 5, 5, 7).unwrap();
        let sizes: Vec<usize> = p.outer.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![20, 19, 19, 19, 19]);
        assert_eq!(p, make_folds(96, 5, 5, 7).unwrap());
        assert!(make_folds(4, 5, 2, 0).is_err());
    }

    #[test]
    fn folds_partition() {
        let p = make_folds(53, 5, 4, 3).unwrap();
        let mut all: Vec<usize> = p.outer.concat();
        all.sort_unstable();
        assert_eq!(all, (0..53).collect::<Vec<_>>());
        for f in 0..5 {
            let mut inner: Vec<usize> = p.inner[f].concat();
            inner.sort_unstable();
            assert_eq!(inner, p.outer_train(f));
            let sizes: Vec<usize> = p.inner[f].iter().map(Vec::len).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn reference_grid_sizes() {
        let g = GridSpec::default();
        assert_eq!(g.svm.len(), 100);
        assert_eq!(g.kernel_ridge.len(), 72);
        assert_eq!(dedup_specs(&g.kernel_ridge).len(), 4 + 12 + 24);
        assert_eq!(g.elastic_net.len(), 20);
        assert_eq!(g.cart.len(), 45);
        assert_eq!(g.knn.len(), 24);
        assert_eq!(g.lasso_meta, vec![0.0001, 0.001, 0.01, 0.1, 1.0]);
    }

    #[test]
    fn selection_rules() {
        assert_eq!(select_best(&[Some(2.0), Some(1.0), Some(1.0)]), Some(1));
        assert_eq!(select_best(&[None, Some(f64::NAN), Some(3.0)]), Some(2));
        assert_eq!(select_best(&[None, None]), None);
    }

    #[test]
    fn single_candidate_and_interpolator() {
        let ds = linear_data(40, 0.0, 1);
        let all: Vec<usize> = (0..40).collect();
        let inner = partition(&all, 4, 2, 0).unwrap();
        let one = [ModelSpec::Mean];
        let r = grid_search(&ds, &all, &inner, TransformKind::Raw, "mean", &one, None).unwrap();
        assert_eq!(r.best, ModelSpec::Mean);
        let two = [
            ModelSpec::Mean,
            ModelSpec::ElasticNet {
                alpha: 0.0,
                l1_ratio: 0.5,
            },
        ];
        let r = grid_search(&ds, &all, &inner, TransformKind::Raw, "two", &two, None).unwrap();
        assert_eq!(r.best_index, 1);
        assert!(r.scores[1].unwrap() < 1e-6);
    }

    #[test]
    fn all_failing_grid() {
        let ds = linear_data(20, 0.1, 3);
        let all: Vec<usize> = (0..20).collect();
        let inner = partition(&all, 4, 2, 0).unwrap();
        let bad = [ModelSpec::Knn {
            k: 50,
            weights: Weights::Uniform,
            metric: Metric::Euclidean,
        }];
        match grid_search(&ds, &all, &inner, TransformKind::Raw, "knn", &bad, None) {
            Err(Error::GridExhausted { learner, causes }) => {
                assert_eq!(learner, "knn");
                assert_eq!(causes.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn noiseless_linear_elastic_net() {
        let ds = linear_data(60, 0.0, 4);
        let plan = make_folds(60, 5, 5, 9).unwrap();
        let grids = GridSpec {
            elastic_net: vec![ModelSpec::ElasticNet {
                alpha: 0.0001,
                l1_ratio: 0.1,
            }],
            ..GridSpec::quick()
        };
        let opts = NestedCvOptions::new(TransformKind::Raw, &[ModelKind::ElasticNet], grids);
        let rep = nested_cv(&ds, &plan, &opts, None).unwrap();
        let m = rep.get(ModelKind::ElasticNet).unwrap();
        assert!(m.e_raw < 1e-3, "{}", m.e_raw);
        let mean: f64 = m.folds.iter().map(|f| f.loss_raw).sum::<f64>() / 5.0;
        assert_eq!(m.e_raw, mean);
    }

    #[test]
    fn audit_has_no_overlap_and_stack_is_out_of_fold() {
        let ds = linear_data(50, 0.3, 5);
        let plan = make_folds(50, 3, 3, 1).unwrap();
        let audit = FitAudit::new();
        let opts = NestedCvOptions::new(
            TransformKind::Copula,
            &ModelKind::REPORTED,
            GridSpec::quick(),
        );
        let rep = nested_cv(&ds, &plan, &opts, Some(&audit)).unwrap();
        assert_eq!(rep.models.len(), 7);
        let recs = audit.records();
        assert!(!recs.is_empty());
        for r in &recs {
            assert!(!r.overlaps(), "{r:?}");
            let f = r.outer_fold.unwrap();
            assert!(r
                .fit_rows
                .iter()
                .all(|i| plan.outer[f].binary_search(i).is_err()));
        }
        for kind in [
            FitTarget::Transform,
            FitTarget::Standardiser,
            FitTarget::Model,
        ] {
            assert!(recs.iter().any(|r| r.target == kind));
        }
    }

    #[test]
    fn meta_features_differ_from_in_sample_fits() {
        let ds = linear_data(40, 0.5, 6);
        let all: Vec<usize> = (0..40).collect();
        let inner = partition(&all, 4, 3, 0).unwrap();
        let grids = GridSpec::quick();
        let set = fit_models(
            &ds,
            &all,
            &inner,
            TransformKind::Raw,
            &[ModelKind::Stacked],
            &grids,
            &AuditCtx::default(),
            &[],
        )
        .unwrap();
        let z = set.meta_features.unwrap();
        // kNN column: refit on all rows and predict the training rows.
        let knn_spec = set.entries[0].selection.specs[4].clone();
        let xs = set.standardiser.apply(ds.x.view()).unwrap();
        let in_sample = knn_spec
            .fit(xs.view(), &ds.y)
            .unwrap()
            .predict(xs.view())
            .unwrap();
        let differs = in_sample
            .iter()
            .zip(z.column(4))
            .filter(|(a, b)| (*a - *b).abs() > 1e-12)
            .count();
        assert!(differs > 30, "{differs}");
    }

    #[test]
    fn constant_baseline_on_standard_normal() {
        let mut r = rng::stream(77, 0);
        let n = 100;
        let x = Array2::from_shape_fn((n, 2), |_| r.random::<f64>());
        let y: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let ds = Dataset::new(x, y, vec!["u".into(), "v".into()]).unwrap();
        let plan = make_folds(n, 5, 5, 3).unwrap();
        let opts = NestedCvOptions::new(TransformKind::Raw, &[ModelKind::Mean], GridSpec::quick());
        let rep = nested_cv(&ds, &plan, &opts, None).unwrap();
        let e = rep.get(ModelKind::Mean).unwrap().e_raw;
        assert!((0.75..=1.25).contains(&e), "{e}");
    }

    #[test]
    fn stacked_with_infinite_penalty_predicts_mean() {
        let ds = linear_data(30, 0.2, 8);
        let all: Vec<usize> = (0..30).collect();
        let inner = partition(&all, 3, 1, 0).unwrap();
        let grids = GridSpec {
            lasso_meta: vec![1e12],
            ..GridSpec::quick()
        };
        let set = fit_models(
            &ds,
            &all,
            &inner,
            TransformKind::Raw,
            &[ModelKind::Stacked],
            &grids,
            &AuditCtx::default(),
            &[],
        )
        .unwrap();
        let pipe = set.pipeline(ModelKind::Stacked).unwrap();
        let ybar = ds.y.iter().sum::<f64>() / 30.0;
        for v in pipe.predict(ds.x.view()).unwrap() {
            assert_abs_diff_eq!(v, ybar, epsilon = 1e-9);
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut ds = linear_data(40, 0.4, 10);
        ds.y.iter_mut().for_each(|v| *v = v.abs());
        let plan = make_folds(40, 3, 3, 5).unwrap();
        let opts = NestedCvOptions::new(
            TransformKind::Log,
            &[ModelKind::Knn, ModelKind::Stacked],
            GridSpec::quick(),
        );
        let a = nested_cv(&ds, &plan, &opts, None).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| nested_cv(&ds, &plan, &opts, None).unwrap());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn duplicate_bases_and_oracle_base() {
        let ds = linear_data(40, 0.3, 12);
        let all: Vec<usize> = (0..40).collect();
        let inner = partition(&all, 4, 5, 0).unwrap();
        let nn = ModelSpec::Knn {
            k: 1,
            weights: Weights::Uniform,
            metric: Metric::Euclidean,
        };
        let en = ModelSpec::ElasticNet {
            alpha: 0.01,
            l1_ratio: 0.5,
        };
        let (pipe, z) = fit_stacked(
            &ds,
            &all,
            &inner,
            TransformKind::Raw,
            &[en.clone(), en],
            &GridSpec::quick(),
            None,
        )
        .unwrap();
        assert_eq!(z.column(0), z.column(1));
        assert!(pipe
            .predict(ds.x.view())
            .unwrap()
            .iter()
            .all(|v| v.is_finite()));
        // 1-NN on its own training rows reproduces y; out-of-fold it cannot.
        let (_, z) = fit_stacked(
            &ds,
            &all,
            &inner,
            TransformKind::Raw,
            &[nn.clone(), nn],
            &GridSpec::quick(),
            None,
        )
        .unwrap();
        assert!(z.column(0).iter().zip(&ds.y).any(|(a, b)| a != b));
    }

    #[test]
    fn in_fold_transform_scores_worse_than_leaky_fit() {
        // Contiguous outer folds along x: the end folds hold responses the
        // in-fold copula never saw, so its inverse saturates there while a
        // transform fitted on all rows already knows those values.
        let n = 60;
        let mut r = rng::stream(21, 0);
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            if j == 0 {
                i as f64 / n as f64
            } else {
                r.random::<f64>()
            }
        });
        let y: Vec<f64> = (0..n).map(|i| (3.0 * x[[i, 0]]).exp()).collect();
        let ds = Dataset::new(x, y, vec!["u".into(), "v".into()]).unwrap();
        let outer: Vec<Vec<usize>> = (0..5).map(|f| (f * 12..(f + 1) * 12).collect()).collect();
        let all: Vec<usize> = (0..n).collect();
        let inner = outer
            .iter()
            .map(|t| partition(&complement(&all, t), 3, 2, 0).unwrap())
            .collect();
        let plan = FoldPlan {
            n,
            k_out: 5,
            k_in: 3,
            seed: 0,
            outer,
            inner,
        };
        let grids = GridSpec {
            elastic_net: vec![ModelSpec::ElasticNet {
                alpha: 1e-4,
                l1_ratio: 0.5,
            }],
            ..GridSpec::quick()
        };
        let mut opts = NestedCvOptions::new(TransformKind::Copula, &[ModelKind::ElasticNet], grids);
        let audit = FitAudit::new();
        let honest = nested_cv(&ds, &plan, &opts, Some(&audit)).unwrap();
        assert!(audit.records().iter().all(|r| !r.overlaps()));
        opts.scope = TransformScope::AllRows;
        let leaky_audit = FitAudit::new();
        let leaky = nested_cv(&ds, &plan, &opts, Some(&leaky_audit)).unwrap();
        assert!(leaky_audit
            .records()
            .iter()
            .any(|r| r.target == FitTarget::Transform && r.overlaps()));
        let (h, l) = (honest.models[0].e_raw, leaky.models[0].e_raw);
        assert!(h > l, "in-fold {h} vs leaky {l}");
    }
}
