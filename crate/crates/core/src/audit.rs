//! Fit instrumentation.
//!
//! [`FitAudit`] records which row indices every transform, standardiser and
//! model fit saw, and which rows its output was evaluated on. Indices are
//! always in the coordinate system of the dataset handed to the cross
//! validation driver. A process-wide counter additionally tallies every fit
//! so that prediction-only code paths can be checked for zero fits.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

static FIT_COUNT: AtomicU64 = AtomicU64::new(0);

pub(crate) fn count_fit() {
    FIT_COUNT.fetch_add(1, Ordering::Relaxed);
}

/// Total number of fits performed by this process so far.
pub fn fit_count() -> u64 {
    FIT_COUNT.load(Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitTarget {
    Transform,
    Standardiser,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub target: FitTarget,
    /// Model or transform label, e.g. `svm` or `copula`.
    pub label: String,
    /// Outer fold the fit belongs to; `None` for fits on the full data.
    pub outer_fold: Option<usize>,
    pub fit_rows: Vec<usize>,
    pub eval_rows: Vec<usize>,
}

impl FitRecord {
    pub fn overlaps(&self) -> bool {
        let mut fit = self.fit_rows.clone();
        fit.sort_unstable();
        self.eval_rows.iter().any(|r| fit.binary_search(r).is_ok())
    }
}

#[derive(Debug, Clone, Default)]
pub struct FitAudit {
    records: Arc<Mutex<Vec<FitRecord>>>,
}

impl FitAudit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, rec: FitRecord) {
        self.records.lock().expect("audit lock").push(rec);
    }

    pub fn records(&self) -> Vec<FitRecord> {
        self.records.lock().expect("audit lock").clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("audit lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Optional audit sink threaded through the CV code.
#[derive(Debug, Clone, Copy, Default)]
pub struct AuditCtx<'a> {
    pub audit: Option<&'a FitAudit>,
    pub outer_fold: Option<usize>,
}

impl<'a> AuditCtx<'a> {
    pub fn new(audit: Option<&'a FitAudit>) -> Self {
        AuditCtx {
            audit,
            outer_fold: None,
        }
    }

    pub fn in_outer(self, fold: usize) -> Self {
        AuditCtx {
            outer_fold: Some(fold),
            ..self
        }
    }

    pub fn log(&self, target: FitTarget, label: &str, fit_rows: &[usize], eval_rows: &[usize]) {
        if let Some(a) = self.audit {
            a.record(FitRecord {
                target,
                label: label.to_string(),
                outer_fold: self.outer_fold,
                fit_rows: fit_rows.to_vec(),
                eval_rows: eval_rows.to_vec(),
            });
        }
    }
}
