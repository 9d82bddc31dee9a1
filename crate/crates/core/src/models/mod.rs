//! Supervised classifiers trained from scratch: decision trees, random
//! forests, logistic regression and gradient-boosted trees.

pub mod forest;
pub mod gbt;
pub mod grid;
pub mod logistic;
pub mod tree;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureSpec;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub use forest::{fit_forest, fit_forest_weighted, ForestModel, ForestParams};
pub use gbt::{fit_gbt, fit_gbt_traced, GbtModel, GbtParams};
pub use grid::{grid_search_cv, CvCell, CvResult, GridSpec, ModelSpec, Prepared};
pub use logistic::{
    fit_logistic, fit_logistic_traced, LinearModel, LogisticFit, LogisticParams, Penalty,
};
pub use tree::{fit_tree, DecisionTree, Node, TreeParams};

/// Independent random stream `stream` derived from `seed`.
pub(crate) fn tree_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-row weights with positives multiplied by `training_weight`.
pub(crate) fn positive_weights(
    y: &[u8],
    weights: Option<&[f64]>,
    training_weight: f64,
) -> Vec<f64> {
    y.iter()
        .enumerate()
        .map(|(i, &l)| {
            let w = weights.map_or(1.0, |w| w[i]);
            if l == 1 {
                w * training_weight
            } else {
                w
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    RandomForest(ForestModel),
    Logistic(LinearModel),
    GradientBoosting(GbtModel),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::RandomForest(m) => m.n_features,
            Model::Logistic(m) => m.weights.len(),
            Model::GradientBoosting(m) => m.n_features,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::RandomForest(_) => "random_forest",
            Model::Logistic(_) => "logistic",
            Model::GradientBoosting(_) => "gradient_boosting",
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self {
            Model::RandomForest(m) => m.predict_row(x),
            Model::Logistic(m) => m.predict_row(x),
            Model::GradientBoosting(m) => m.predict_row(x),
        }
    }
}

/// Per-row `P_predict`.
pub fn predict_proba(model: &Model, x: &FeatureMatrix) -> Result<Vec<f64>> {
    if x.n_cols() != model.n_features() {
        return Err(Error::invalid(format!(
            "model expects {} features, got {}",
            model.n_features(),
            x.n_cols()
        )));
    }
    let rows: Vec<&[f64]> = x.rows().collect();
    Ok(rows.par_iter().map(|r| model.predict_row(r)).collect())
}

/// Probability cut-off for issuing an alert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AlertThreshold(f64);

impl AlertThreshold {
    pub fn new(p: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(Error::invalid(format!(
                "alert threshold {p} outside [0, 1]"
            )))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for AlertThreshold {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<AlertThreshold> for f64 {
    fn from(t: AlertThreshold) -> f64 {
        t.0
    }
}

/// Alert iff `P_predict >= threshold`.
pub fn classify(scores: &[f64], threshold: AlertThreshold) -> Vec<bool> {
    crate::metrics::classify(scores, threshold.0)
}

/// Trains the model described by `spec`.
pub fn fit_model(spec: &ModelSpec, x: &FeatureMatrix, y: &[u8], seed: u64) -> Result<Model> {
    let ones = vec![1.0; y.len()];
    Ok(match spec {
        ModelSpec::RandomForest(p) => Model::RandomForest(fit_forest(x, y, p, seed)?),
        ModelSpec::Logistic(p) => Model::Logistic(fit_logistic(x, y, &ones, p)?),
        ModelSpec::GradientBoosting(p) => Model::GradientBoosting(fit_gbt(x, y, &ones, p)?),
    })
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned on-disk model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub seed: u64,
    pub feature_spec: Option<FeatureSpec>,
    pub feature_names: Vec<String>,
    pub model: Model,
}

impl ModelDocument {
    pub fn new(
        model: Model,
        seed: u64,
        feature_spec: Option<FeatureSpec>,
        feature_names: Vec<String>,
    ) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            seed,
            feature_spec,
            feature_names,
            model,
        }
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(s)?;
        doc.check()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.to_writer(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let doc: Self = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::format(path, e.to_string()))?;
        doc.check().map_err(|e| Error::format(path, e.to_string()))
    }

    fn check(self) -> Result<Self> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if !self.feature_names.is_empty() && self.feature_names.len() != self.model.n_features() {
            return Err(Error::invalid(
                "feature names do not match the model's feature count",
            ));
        }
        Ok(self)
    }
}
