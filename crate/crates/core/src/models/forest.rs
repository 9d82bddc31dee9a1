use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_binned, validate_training, BinnedMatrix, DecisionTree, TreeParams};
use super::{positive_weights, tree_rng};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` means `floor(sqrt(n_features))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    /// Multiplier applied to the weight of every positive example.
    pub training_weight: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
            training_weight: 1.0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        if !(self.training_weight.is_finite() && self.training_weight > 0.0) {
            return Err(Error::invalid(format!(
                "training weight must be finite and positive, got {}",
                self.training_weight
            )));
        }
        self.tree_params(1).validate()
    }

    pub fn resolved_max_features(&self, n_features: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| ((n_features as f64).sqrt().floor() as usize).max(1))
    }

    fn tree_params(&self, n_features: usize) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            max_features: Some(self.resolved_max_features(n_features)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub seed: u64,
    /// Resolved per-split feature subsample size.
    pub max_features: usize,
    pub n_features: usize,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    /// Soft vote: mean of the trees' leaf fractions.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict_row(x)).sum();
        s / self.trees.len() as f64
    }
}

/// Random forest with bootstrap resampling and per-split feature subsampling.
///
/// Tree `i` draws from its own ChaCha8 stream `(seed, i)`, so the result does
/// not depend on how trees are scheduled across threads.
pub fn fit_forest(
    x: &FeatureMatrix,
    y: &[u8],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    validate_training(x, y, None)?;
    params.validate()?;
    let data = BinnedMatrix::new(x)?;
    fit_forest_binned(&data, y, None, params, seed)
}

/// As [`fit_forest`] with extra per-row weights (multiplied with the
/// positive-class training weight).
pub fn fit_forest_weighted(
    x: &FeatureMatrix,
    y: &[u8],
    weights: &[f64],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    validate_training(x, y, Some(weights))?;
    params.validate()?;
    let data = BinnedMatrix::new(x)?;
    fit_forest_binned(&data, y, Some(weights), params, seed)
}

pub(crate) fn fit_forest_binned(
    data: &BinnedMatrix,
    y: &[u8],
    weights: Option<&[f64]>,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    params.validate()?;
    let n = data.n_rows();
    let n_features = data.n_features();
    let tree_params = params.tree_params(n_features);
    let max_features = tree_params.resolved_max_features(n_features)?;
    let w = positive_weights(y, weights, params.training_weight);
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree_rng(seed, i as u64);
            let mut counts = vec![if params.bootstrap { 0u32 } else { 1 }; n];
            if params.bootstrap {
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
            }
            fit_tree_binned(data, y, &w, &counts, &tree_params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        params: *params,
        seed,
        max_features,
        n_features,
        trees,
    })
}
