//! Shapley attributions for tree ensembles and feature importance.
//!
//! Attributions are interventional: features outside a coalition take their
//! values from a background row, and the result is averaged over the
//! background set.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::metrics::auprc;
use crate::models::{predict_proba, DecisionTree, ForestModel, Model, Node};

pub const DEFAULT_BACKGROUND_ROWS: usize = 512;
pub const BRUTE_FORCE_MAX_FEATURES: usize = 15;
pub const PERMUTATION_REPEATS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapAttribution {
    pub values: Vec<f64>,
    /// Mean model score over the background rows.
    pub base: f64,
}

impl ShapAttribution {
    /// `base + sum(values)`, which equals the model score of the explained row.
    pub fn total(&self) -> f64 {
        self.base + self.values.iter().sum::<f64>()
    }
}

/// `a! b! / (a + b + 1)!`
fn coalition_weight(a: usize, b: usize) -> f64 {
    let mut w = 1.0 / (a + b + 1) as f64;
    for i in 1..=a {
        w *= i as f64 / (b + i) as f64;
    }
    w
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Free,
    X,
    Z,
}

struct PairWalk<'a> {
    tree: &'a DecisionTree,
    x: &'a [f64],
    z: &'a [f64],
    side: Vec<Side>,
    on_x: Vec<usize>,
    on_z: Vec<usize>,
    scale: f64,
}

impl PairWalk<'_> {
    /// Adds the Shapley values of the two-point game `(x, z)` on this tree.
    fn walk(&mut self, node: usize, phi: &mut [f64]) {
        match self.tree.nodes()[node] {
            Node::Leaf { value, .. } => {
                let v = value * self.scale;
                let (a, b) = (self.on_x.len(), self.on_z.len());
                if a > 0 {
                    let w = v * coalition_weight(a - 1, b);
                    for &f in &self.on_x {
                        phi[f] += w;
                    }
                }
                if b > 0 {
                    let w = v * coalition_weight(a, b - 1);
                    for &f in &self.on_z {
                        phi[f] -= w;
                    }
                }
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let child = |v: f64| if v <= threshold { left } else { right };
                let (cx, cz) = (child(self.x[feature]), child(self.z[feature]));
                match self.side[feature] {
                    Side::X => self.walk(cx, phi),
                    Side::Z => self.walk(cz, phi),
                    Side::Free if cx == cz => self.walk(cx, phi),
                    Side::Free => {
                        self.side[feature] = Side::X;
                        self.on_x.push(feature);
                        self.walk(cx, phi);
                        self.on_x.pop();
                        self.side[feature] = Side::Z;
                        self.on_z.push(feature);
                        self.walk(cz, phi);
                        self.on_z.pop();
                        self.side[feature] = Side::Free;
                    }
                }
            }
        }
    }
}

/// Interventional Shapley values of `sum_t scale * tree_t(x)`.
pub fn tree_shap_trees(
    trees: &[DecisionTree],
    scale: f64,
    x: &[f64],
    background: &FeatureMatrix,
) -> Result<ShapAttribution> {
    let n = background.n_cols();
    if background.n_rows() == 0 {
        return Err(Error::invalid("background set is empty"));
    }
    if x.len() != n || trees.iter().any(|t| t.n_features() != n) {
        return Err(Error::invalid(format!(
            "row has {} features, background has {n}, model expects {}",
            x.len(),
            trees.first().map_or(n, |t| t.n_features())
        )));
    }
    let mut phi = vec![0.0; n];
    let mut base = 0.0;
    for tree in trees {
        let mut tphi = vec![0.0; n];
        for z in background.rows() {
            let mut w = PairWalk {
                tree,
                x,
                z,
                side: vec![Side::Free; n],
                on_x: Vec::new(),
                on_z: Vec::new(),
                scale,
            };
            w.walk(0, &mut tphi);
            base += scale * tree.predict_row(z);
        }
        for (p, t) in phi.iter_mut().zip(&tphi) {
            *p += t;
        }
    }
    let m = background.n_rows() as f64;
    for p in &mut phi {
        *p /= m;
    }
    Ok(ShapAttribution {
        values: phi,
        base: base / m,
    })
}

/// Shapley values of a forest's soft-vote probability.
pub fn tree_shap(
    model: &ForestModel,
    x: &[f64],
    background: &FeatureMatrix,
) -> Result<ShapAttribution> {
    tree_shap_trees(&model.trees, 1.0 / model.trees.len() as f64, x, background)
}

/// Attributions for every row of `rows`, computed in parallel.
pub fn explain_rows(
    model: &ForestModel,
    rows: &FeatureMatrix,
    background: &FeatureMatrix,
) -> Result<Vec<ShapAttribution>> {
    let rows: Vec<&[f64]> = rows.rows().collect();
    rows.par_iter()
        .map(|r| tree_shap(model, r, background))
        .collect()
}

/// Exhaustive-coalition Shapley values of any scoring function.
pub fn brute_shap_fn<F>(f: F, x: &[f64], background: &FeatureMatrix) -> Result<ShapAttribution>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    if n > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::invalid(format!(
            "{n} features exceed the exhaustive limit of {BRUTE_FORCE_MAX_FEATURES}"
        )));
    }
    if background.n_rows() == 0 || background.n_cols() != n {
        return Err(Error::invalid(
            "background must be nonempty with matching columns",
        ));
    }
    let m = background.n_rows() as f64;
    let mut buf = vec![0.0; n];
    let value: Vec<f64> = (0..1usize << n)
        .map(|mask| {
            background
                .rows()
                .map(|z| {
                    for j in 0..n {
                        buf[j] = if mask >> j & 1 == 1 { x[j] } else { z[j] };
                    }
                    f(&buf)
                })
                .sum::<f64>()
                / m
        })
        .collect();
    let fact: Vec<f64> = (0..=n)
        .scan(1.0, |acc, i| {
            if i > 0 {
                *acc *= i as f64;
            }
            Some(*acc)
        })
        .collect();
    let mut phi = vec![0.0; n];
    for (j, p) in phi.iter_mut().enumerate() {
        for mask in 0..1usize << n {
            if mask >> j & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact[s] * fact[n - s - 1] / fact[n];
            *p += w * (value[mask | 1 << j] - value[mask]);
        }
    }
    Ok(ShapAttribution {
        values: phi,
        base: value[0],
    })
}

/// Exhaustive oracle for the probability output of `model`.
pub fn brute_shap(model: &Model, x: &[f64], background: &FeatureMatrix) -> Result<ShapAttribution> {
    if x.len() != model.n_features() {
        return Err(Error::invalid(
            "row does not match the model's feature count",
        ));
    }
    brute_shap_fn(|r| model.predict_row(r), x, background)
}

/// At most `max_rows` rows drawn without replacement; returns the sample
/// and the chosen row indices (ascending).
pub fn background_sample(
    x: &FeatureMatrix,
    max_rows: usize,
    seed: u64,
) -> (FeatureMatrix, Vec<usize>) {
    let mut idx: Vec<usize> = (0..x.n_rows()).collect();
    if idx.len() > max_rows {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        idx.shuffle(&mut rng);
        idx.truncate(max_rows);
        idx.sort_unstable();
    }
    (x.select_rows(&idx), idx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    MeanAbsShap,
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: usize,
    pub name: String,
    pub score: f64,
}

/// Features sorted by decreasing importance (ties by index).
///
/// `MeanAbsShap` averages `|phi|` over the rows of `x` (forests only), using a
/// background subsample of `x`. `Permutation` averages the AUPRC drop over
/// seeded shuffles of each column.
pub fn importance_ranking(
    model: &Model,
    x: &FeatureMatrix,
    y: &[u8],
    names: &[String],
    method: ImportanceMethod,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    if x.n_rows() == 0 {
        return Err(Error::invalid("importance needs at least one row"));
    }
    if names.len() != x.n_cols() || x.n_cols() != model.n_features() {
        return Err(Error::invalid(
            "feature names, data and model disagree on the feature count",
        ));
    }
    let scores = match method {
        ImportanceMethod::MeanAbsShap => {
            let Model::RandomForest(forest) = model else {
                return Err(Error::invalid(
                    "SHAP importance is only available for random forests",
                ));
            };
            let (bg, _) = background_sample(x, DEFAULT_BACKGROUND_ROWS, seed);
            let attr = explain_rows(forest, x, &bg)?;
            let mut s = vec![0.0; x.n_cols()];
            for a in &attr {
                for (acc, v) in s.iter_mut().zip(&a.values) {
                    *acc += v.abs();
                }
            }
            s.iter().map(|v| v / attr.len() as f64).collect::<Vec<_>>()
        }
        ImportanceMethod::Permutation => {
            if y.len() != x.n_rows() {
                return Err(Error::invalid("label count does not match the data"));
            }
            let reference = auprc(&predict_proba(model, x)?, y)?;
            (0..x.n_cols())
                .into_par_iter()
                .map(|j| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(j as u64);
                    let mut drop = 0.0;
                    let mut xp = x.clone();
                    let col = x.column(j);
                    for _ in 0..PERMUTATION_REPEATS {
                        let mut perm = col.clone();
                        perm.shuffle(&mut rng);
                        for (i, v) in perm.into_iter().enumerate() {
                            xp.set(i, j, v);
                        }
                        drop += reference - auprc(&predict_proba(model, &xp)?, y)?;
                    }
                    Ok(drop / PERMUTATION_REPEATS as f64)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut out: Vec<FeatureImportance> = scores
        .into_iter()
        .enumerate()
        .map(|(feature, score)| FeatureImportance {
            feature,
            name: names[feature].clone(),
            score,
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.feature.cmp(&b.feature)));
    Ok(out)
}

/// Long-format export: `row_id,feature_name,feature_value,shap_value`.
pub fn write_attributions<W: Write>(
    writer: W,
    row_ids: &[String],
    x: &FeatureMatrix,
    names: &[String],
    attributions: &[ShapAttribution],
) -> Result<()> {
    if row_ids.len() != attributions.len()
        || x.n_rows() != attributions.len()
        || names.len() != x.n_cols()
    {
        return Err(Error::invalid("attribution export inputs disagree in size"));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row_id", "feature_name", "feature_value", "shap_value"])?;
    for ((id, row), a) in row_ids.iter().zip(x.rows()).zip(attributions) {
        for ((name, v), phi) in names.iter().zip(row).zip(&a.values) {
            w.write_record([id.as_str(), name.as_str(), &v.to_string(), &phi.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
