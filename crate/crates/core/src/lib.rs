//! Rainfall-driven debris-flow early warning: effective antecedent rainfall,
//! window datasets, threshold baselines, tree ensembles and evaluation.

// `!(v > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod explain;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod rainfall;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::FeatureMatrix;
