use serde::{Deserialize, Serialize};

use super::positive_weights;
use super::tree::validate_training;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Regularization. `L2 { c }` uses the inverse-strength convention:
/// the objective is `0.5 * |w|^2 + c * sum_i weight_i * loss_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Penalty {
    None,
    L2 { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub penalty: Penalty,
    pub max_iter: usize,
    /// Stop when the gradient norm of the normalized objective drops below this.
    pub tol: f64,
    pub training_weight: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            penalty: Penalty::L2 { c: 1.0 },
            max_iter: 10_000,
            tol: 1e-6,
            training_weight: 1.0,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        if let Penalty::L2 { c } = self.penalty {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid(format!(
                    "L2 coefficient must be positive, got {c}"
                )));
            }
        }
        if !(self.training_weight.is_finite() && self.training_weight > 0.0) {
            return Err(Error::invalid(
                "training weight must be finite and positive",
            ));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::invalid(
                "tolerance and iteration limit must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub penalty: Penalty,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

/// Diagnostics from [`fit_logistic_traced`].
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub model: LinearModel,
    /// Normalized objective after each accepted step, starting at the origin.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Weighted logistic objective divided by the total weight (and by `c`):
/// `sum_i w_i loss_i / W + |beta|^2 / (2 c W)`. The bias is not penalized.
pub(crate) struct Objective<'a> {
    x: &'a FeatureMatrix,
    y: &'a [u8],
    w: Vec<f64>,
    ridge: f64,
}

impl<'a> Objective<'a> {
    pub(crate) fn new(x: &'a FeatureMatrix, y: &'a [u8], w: Vec<f64>, penalty: Penalty) -> Self {
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / total).collect();
        let ridge = match penalty {
            Penalty::None => 0.0,
            Penalty::L2 { c } => 1.0 / (c * total),
        };
        Self { x, y, w, ridge }
    }

    fn z(&self, theta: &[f64], row: &[f64]) -> f64 {
        let d = row.len();
        theta[d] + theta[..d].iter().zip(row).map(|(a, b)| a * b).sum::<f64>()
    }

    pub(crate) fn value(&self, theta: &[f64]) -> f64 {
        let d = self.x.n_cols();
        let mut v = 0.0;
        for (i, row) in self.x.rows().enumerate() {
            let z = self.z(theta, row);
            v += self.w[i] * (softplus(z) - if self.y[i] == 1 { z } else { 0.0 });
        }
        v + 0.5 * self.ridge * theta[..d].iter().map(|b| b * b).sum::<f64>()
    }

    pub(crate) fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.x.n_cols();
        let mut g = vec![0.0; d + 1];
        for (i, row) in self.x.rows().enumerate() {
            let r = self.w[i] * (sigmoid(self.z(theta, row)) - self.y[i] as f64);
            for (gj, xj) in g.iter_mut().zip(row) {
                *gj += r * xj;
            }
            g[d] += r;
        }
        for j in 0..d {
            g[j] += self.ridge * theta[j];
        }
        g
    }

    /// Gradient and Hessian (row-major, `(d+1)^2`).
    fn derivatives(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.x.n_cols();
        let p = d + 1;
        let mut h = vec![0.0; p * p];
        let mut xt = vec![1.0; p];
        for (i, row) in self.x.rows().enumerate() {
            let s = sigmoid(self.z(theta, row));
            let c = self.w[i] * s * (1.0 - s);
            if c == 0.0 {
                continue;
            }
            xt[..d].copy_from_slice(row);
            for a in 0..p {
                let ca = c * xt[a];
                if ca == 0.0 {
                    continue;
                }
                let hr = &mut h[a * p..a * p + a + 1];
                for (b, hv) in hr.iter_mut().enumerate() {
                    *hv += ca * xt[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[b * p + a] = h[a * p + b];
            }
        }
        for j in 0..d {
            h[j * p + j] += self.ridge;
        }
        (self.gradient(theta), h)
    }
}

/// Solves `h x = b` for symmetric positive semi-definite `h`, adding a small
/// diagonal shift when the Cholesky factorization breaks down.
fn solve_spd(h: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let p = b.len();
    let trace: f64 = (0..p)
        .map(|i| h[i * p + i])
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let mut shift = 0.0;
    for _ in 0..12 {
        if let Some(l) = cholesky(h, p, shift) {
            let mut z = b.to_vec();
            for i in 0..p {
                let s: f64 = (0..i).map(|k| l[i * p + k] * z[k]).sum();
                z[i] = (z[i] - s) / l[i * p + i];
            }
            for i in (0..p).rev() {
                let s: f64 = (i + 1..p).map(|k| l[k * p + i] * z[k]).sum();
                z[i] = (z[i] - s) / l[i * p + i];
            }
            return Some(z);
        }
        shift = if shift == 0.0 {
            1e-12 * trace / p as f64
        } else {
            shift * 100.0
        };
    }
    None
}

fn cholesky(h: &[f64], p: usize, shift: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * p + k] * l[j * p + k]).sum();
            if i == j {
                let v = h[i * p + i] + shift - s;
                if !(v > 0.0) || !v.is_finite() {
                    return None;
                }
                l[i * p + i] = v.sqrt();
            } else {
                l[i * p + j] = (h[i * p + j] - s) / l[j * p + j];
            }
        }
    }
    Some(l)
}

/// Weighted (optionally L2-penalized) logistic regression.
pub fn fit_logistic(
    x: &FeatureMatrix,
    y: &[u8],
    weights: &[f64],
    params: &LogisticParams,
) -> Result<LinearModel> {
    fit_logistic_traced(x, y, weights, params).map(|f| f.model)
}

/// Damped Newton iterations with Armijo backtracking; every accepted step
/// lowers the objective. Falls back to steepest descent when the Newton
/// direction is not a descent direction.
pub fn fit_logistic_traced(
    x: &FeatureMatrix,
    y: &[u8],
    weights: &[f64],
    params: &LogisticParams,
) -> Result<LogisticFit> {
    validate_training(x, y, Some(weights))?;
    params.validate()?;
    let w = positive_weights(y, Some(weights), params.training_weight);
    let obj = Objective::new(x, y, w, params.penalty);
    let d = x.n_cols();
    let mut theta = vec![0.0; d + 1];
    let mut loss = obj.value(&theta);
    let mut trace = vec![loss];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        let (g, h) = obj.derivatives(&theta);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !gnorm.is_finite() {
            return Err(Error::Numerical("logistic gradient is not finite".into()));
        }
        if gnorm < params.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut dir = solve_spd(&h, &neg).unwrap_or_else(|| neg.clone());
        let mut slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) || !slope.is_finite() {
            dir = neg;
            slope = -gnorm * gnorm;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            let v = obj.value(&cand);
            if v.is_finite() && v <= loss + 1e-4 * t * slope {
                accepted = Some((cand, v));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, v)) => {
                theta = cand;
                loss = v;
                trace.push(v);
            }
            // no representable decrease left
            None => {
                converged = true;
                break;
            }
        }
    }
    if !loss.is_finite() || theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("logistic objective is not finite".into()));
    }
    if !converged {
        log::warn!("logistic regression stopped after {iterations} iterations without converging");
    }
    let bias = theta[d];
    theta.truncate(d);
    Ok(LogisticFit {
        model: LinearModel {
            weights: theta,
            bias,
            penalty: params.penalty,
        },
        loss_trace: trace,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(x: &FeatureMatrix, y: &[u8], penalty: Penalty) -> LogisticFit {
        let p = LogisticParams {
            penalty,
            ..Default::default()
        };
        fit_logistic_traced(x, y, &vec![1.0; y.len()], &p).unwrap()
    }

    #[test]
    fn symmetric_data_has_zero_bias() {
        let x = FeatureMatrix::from_rows(&[[-2.0], [-1.0], [1.0], [2.0], [-0.5], [0.5]]).unwrap();
        let f = fit(&x, &[0, 0, 1, 1, 1, 0], Penalty::None);
        assert!(f.converged);
        assert!(f.model.bias.abs() < 1e-4);
        assert!(f.model.weights[0] > 0.0);
    }

    #[test]
    fn separable_with_l2_is_finite_and_accurate() {
        let x = FeatureMatrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]]).unwrap();
        let y = [0, 0, 0, 1, 1, 1];
        let f = fit(&x, &y, Penalty::L2 { c: 10.0 });
        assert!(f.model.weights[0].is_finite());
        for (r, &l) in x.rows().zip(&y) {
            assert_eq!(u8::from(f.model.predict_row(r) >= 0.5), l);
        }
    }

    #[test]
    fn loss_never_increases() {
        let rows: Vec<[f64; 2]> = (0..50)
            .map(|i| [(i % 7) as f64, (i % 3) as f64 - 1.0])
            .collect();
        let y: Vec<u8> = (0..50).map(|i| u8::from((i * 13) % 5 < 2)).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let f = fit(&x, &y, Penalty::L2 { c: 1.0 });
        assert!(f.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_model_is_one_half() {
        let m = LinearModel {
            weights: vec![0.0; 3],
            bias: 0.0,
            penalty: Penalty::None,
        };
        assert_eq!(m.predict_row(&[1.0, 2.0, 3.0]), 0.5);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert_eq!(softplus(800.0), 800.0);
    }
}
