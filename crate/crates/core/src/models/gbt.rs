use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::tree::{
    grow, validate_training, BinnedMatrix, Criterion, DecisionTree, GrowParams, Node, NodeStat,
};
use super::{positive_weights, tree_rng};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: Option<usize>,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub training_weight: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: Some(6),
            min_child_weight: 1.0,
            lambda: 1.0,
            training_weight: 1.0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid(format!(
                "invalid learning rate {}",
                self.learning_rate
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) || !(self.min_child_weight >= 0.0) {
            return Err(Error::invalid(
                "lambda and min_child_weight must be non-negative",
            ));
        }
        if !(self.training_weight.is_finite() && self.training_weight > 0.0) {
            return Err(Error::invalid(
                "training weight must be finite and positive",
            ));
        }
        if self.max_depth == Some(0) {
            return Err(Error::invalid(
                "max_depth must be at least 1 (or unbounded)",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    /// Prior log-odds of the weighted positive rate.
    pub base_score: f64,
    pub n_features: usize,
    /// Leaf values already include the learning rate.
    pub trees: Vec<DecisionTree>,
}

impl GbtModel {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct GradStat {
    g: f64,
    h: f64,
    n: u64,
}

impl NodeStat for GradStat {
    fn add(&mut self, o: &Self) {
        self.g += o.g;
        self.h += o.h;
        self.n += o.n;
    }

    fn minus(&self, o: &Self) -> Self {
        Self {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }

    fn count(&self) -> u64 {
        self.n
    }

    fn scale(&self) -> f64 {
        self.h + self.g.abs()
    }
}

struct Newton {
    lambda: f64,
    min_child_weight: f64,
}

impl Criterion for Newton {
    type Stat = GradStat;

    fn score(&self, s: &GradStat) -> f64 {
        let d = s.h + self.lambda;
        if d > 0.0 {
            s.g * s.g / d
        } else {
            0.0
        }
    }

    fn child_ok(&self, s: &GradStat) -> bool {
        s.n >= 1 && s.h >= self.min_child_weight
    }

    fn splittable(&self, s: &GradStat) -> bool {
        s.n >= 2
    }

    fn leaf(&self, s: &GradStat) -> (f64, f64) {
        let d = s.h + self.lambda;
        (if d > 0.0 { -s.g / d } else { 0.0 }, s.h)
    }
}

const P_CLAMP: f64 = 1e-12;

fn weighted_log_loss(raw: &[f64], y: &[u8], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let s: f64 = raw
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&z, &l), &wi)| {
            let p = sigmoid(z).clamp(P_CLAMP, 1.0 - P_CLAMP);
            -wi * if l == 1 { p.ln() } else { (1.0 - p).ln() }
        })
        .sum();
    s / total
}

/// Gradient-boosted trees on the logistic loss.
pub fn fit_gbt(
    x: &FeatureMatrix,
    y: &[u8],
    weights: &[f64],
    params: &GbtParams,
) -> Result<GbtModel> {
    fit_gbt_traced(x, y, weights, params).map(|(m, _)| m)
}

/// As [`fit_gbt`], also returning the weighted training log-loss of the
/// prior model followed by the loss after each round.
pub fn fit_gbt_traced(
    x: &FeatureMatrix,
    y: &[u8],
    weights: &[f64],
    params: &GbtParams,
) -> Result<(GbtModel, Vec<f64>)> {
    validate_training(x, y, Some(weights))?;
    let data = BinnedMatrix::new(x)?;
    fit_gbt_binned(&data, y, Some(weights), params)
}

pub(crate) fn fit_gbt_binned(
    data: &BinnedMatrix,
    y: &[u8],
    weights: Option<&[f64]>,
    params: &GbtParams,
) -> Result<(GbtModel, Vec<f64>)> {
    params.validate()?;
    let n = data.n_rows();
    let w = positive_weights(y, weights, params.training_weight);
    let pos: f64 = w
        .iter()
        .zip(y)
        .filter(|(_, &l)| l == 1)
        .map(|(v, _)| v)
        .sum();
    let total: f64 = w.iter().sum();
    let prior = (pos / total).clamp(P_CLAMP, 1.0 - P_CLAMP);
    let base_score = (prior / (1.0 - prior)).ln();
    let mut raw = vec![base_score; n];
    let mut trace = vec![weighted_log_loss(&raw, y, &w)];
    let crit = Newton {
        lambda: params.lambda,
        min_child_weight: params.min_child_weight,
    };
    let grow_params = GrowParams {
        max_depth: params.max_depth,
        max_features: data.n_features(),
    };
    // no feature sampling, so the stream is never drawn from
    let mut rng = tree_rng(0, 0);
    let mut trees = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        let stats: Vec<GradStat> = raw
            .par_iter()
            .zip(y.par_iter())
            .zip(w.par_iter())
            .map(|((&z, &l), &wi)| {
                let p = sigmoid(z);
                GradStat {
                    g: wi * (p - l as f64),
                    h: wi * p * (1.0 - p),
                    n: 1,
                }
            })
            .collect();
        let mut nodes = grow(
            data,
            (0..n).collect(),
            &stats,
            &crit,
            &grow_params,
            &mut rng,
        );
        for node in &mut nodes {
            if let Node::Leaf { value, .. } = node {
                *value *= params.learning_rate;
                if !value.is_finite() {
                    return Err(Error::Numerical(
                        "boosting produced a non-finite leaf".into(),
                    ));
                }
            }
        }
        let tree = DecisionTree::from_nodes(nodes, data.n_features(), params.max_depth, 1);
        raw.par_iter_mut().enumerate().for_each(|(i, z)| {
            *z += tree.predict_with(|f| data.value(i, f));
        });
        trace.push(weighted_log_loss(&raw, y, &w));
        trees.push(tree);
    }
    Ok((
        GbtModel {
            params: *params,
            base_score,
            n_features: data.n_features(),
            trees,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step() -> (FeatureMatrix, Vec<u8>) {
        let rows: Vec<[f64; 1]> = (0..40).map(|i| [i as f64]).collect();
        let y = (0..40).map(|i| u8::from(i >= 25 || i % 9 == 0)).collect();
        (FeatureMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn zero_rounds_is_prior() {
        let (x, y) = step();
        let p = GbtParams {
            n_rounds: 0,
            ..Default::default()
        };
        let m = fit_gbt(&x, &y, &[1.0; 40], &p).unwrap();
        let rate = y.iter().map(|&v| v as f64).sum::<f64>() / 40.0;
        assert!((m.predict_row(&[3.0]) - rate).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_is_prior() {
        let (x, y) = step();
        let p = GbtParams {
            n_rounds: 5,
            learning_rate: 0.0,
            ..Default::default()
        };
        let m = fit_gbt(&x, &y, &[1.0; 40], &p).unwrap();
        let rate = y.iter().map(|&v| v as f64).sum::<f64>() / 40.0;
        for r in x.rows() {
            assert!((m.predict_row(r) - rate).abs() < 1e-12);
        }
    }

    #[test]
    fn stumps_decrease_training_loss_every_round() {
        let (x, y) = step();
        let p = GbtParams {
            n_rounds: 50,
            learning_rate: 0.1,
            max_depth: Some(1),
            ..Default::default()
        };
        let (_, trace) = fit_gbt_traced(&x, &y, &[1.0; 40], &p).unwrap();
        assert_eq!(trace.len(), 51);
        assert!(trace.windows(2).all(|w| w[1] < w[0]), "{trace:?}");
    }
}
