//! Heavy metal pollution index analysis: index computation, rank
//! correlation, response transforms, regression learners with nested cross
//! validation and stacking, evaluation metrics, dominance clustering and
//! spatial mapping.

// `!(a > b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod cli;
pub mod cluster;
pub mod cv;
pub mod data;
pub mod dist;
pub mod error;
pub mod hpi;
pub mod learners;
pub mod linalg;
pub mod metrics;
pub mod rank;
pub mod rng;
pub mod spatial;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};
