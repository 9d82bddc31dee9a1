//! Hour-level classification metrics for warning models.
//!
//! Ratios whose denominator is zero are reported as `None` rather than NaN,
//! so that "no alerts issued" stays distinguishable from a precision of 0.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn from_totals(tp: u64, fp: u64, positives: u64, negatives: u64) -> Self {
        Self {
            tp,
            fp,
            tn: negatives - fp,
            fn_: positives - tp,
        }
    }
}

pub fn confusion(labels: &[u8], predictions: &[bool]) -> Result<ConfusionCounts> {
    if labels.len() != predictions.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y != 0, p) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Point metrics of a confusion matrix; `None` marks a 0/0 ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub fdr: Option<f64>,
    #[serde(rename = "for")]
    pub for_: Option<f64>,
}

pub fn point_metrics(c: &ConfusionCounts) -> PointMetrics {
    PointMetrics {
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
        fpr: ratio(c.fp, c.fp + c.tn),
        fnr: ratio(c.fn_, c.fn_ + c.tp),
        fdr: ratio(c.fp, c.fp + c.tp),
        for_: ratio(c.fn_, c.fn_ + c.tn),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Roc,
    Pr,
}

impl CurveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveKind::Roc => "roc",
            CurveKind::Pr => "pr",
        }
    }
}

/// One operating point. `x`/`y` are (FPR, TPR) for ROC and (recall,
/// precision) for PR; the raw counts are kept for exact integer areas and
/// for operating-point tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
    pub tp: u64,
    pub fp: u64,
}

/// Points ordered by decreasing threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub kind: CurveKind,
    pub positives: u64,
    pub negatives: u64,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    /// Builds a curve from `(threshold, tp, fp)` triples in decreasing-threshold order.
    ///
    /// ROC curves get the (0,0) and (1,1) endpoints when they are not reached;
    /// PR curves skip thresholds at which nothing is predicted positive.
    pub fn from_counts(
        kind: CurveKind,
        positives: u64,
        negatives: u64,
        counts: impl IntoIterator<Item = (f64, u64, u64)>,
    ) -> Result<Self> {
        match kind {
            CurveKind::Roc if positives == 0 || negatives == 0 => {
                return Err(Error::invalid(
                    "ROC curve needs both positive and negative labels",
                ))
            }
            CurveKind::Pr if positives == 0 => {
                return Err(Error::invalid("PR curve needs at least one positive label"))
            }
            _ => {}
        }
        let p = positives as f64;
        let n = negatives as f64;
        let mut points = Vec::new();
        if kind == CurveKind::Roc {
            points.push(CurvePoint {
                threshold: f64::INFINITY,
                x: 0.0,
                y: 0.0,
                tp: 0,
                fp: 0,
            });
        }
        for (threshold, tp, fp) in counts {
            let point = match kind {
                CurveKind::Roc => CurvePoint {
                    threshold,
                    x: fp as f64 / n,
                    y: tp as f64 / p,
                    tp,
                    fp,
                },
                CurveKind::Pr if tp + fp == 0 => continue,
                CurveKind::Pr => CurvePoint {
                    threshold,
                    x: tp as f64 / p,
                    y: tp as f64 / (tp + fp) as f64,
                    tp,
                    fp,
                },
            };
            if kind == CurveKind::Roc && tp == 0 && fp == 0 {
                continue;
            }
            points.push(point);
        }
        if kind == CurveKind::Roc {
            let last = points.last().expect("start point");
            if last.tp != positives || last.fp != negatives {
                points.push(CurvePoint {
                    threshold: f64::NEG_INFINITY,
                    x: 1.0,
                    y: 1.0,
                    tp: positives,
                    fp: negatives,
                });
            }
        }
        Ok(Self {
            kind,
            positives,
            negatives,
            points,
        })
    }

    /// Confusion matrix at one of the curve's points.
    pub fn confusion_at(&self, point: &CurvePoint) -> ConfusionCounts {
        ConfusionCounts::from_totals(point.tp, point.fp, self.positives, self.negatives)
    }

    /// Curve export: `kind,threshold,x,y`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "threshold", "x", "y"])?;
        for p in &self.points {
            w.write_record([
                self.kind.as_str(),
                &p.threshold.to_string(),
                &p.x.to_string(),
                &p.y.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_scores(scores: &[f64], labels: &[u8]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan() || *s == f64::INFINITY) {
        return Err(Error::invalid(
            "scores must be finite (or -inf for hours that can never alert)",
        ));
    }
    let pos = labels.iter().filter(|&&y| y != 0).count() as u64;
    Ok((pos, labels.len() as u64 - pos))
}

/// Cumulative `(threshold, tp, fp)` at every distinct finite score, highest
/// first. Hours scored `-inf` never alert and only enter via the ROC endpoint.
fn threshold_counts(scores: &[f64], labels: &[u8]) -> Vec<(f64, u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] != 0 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_group && scores[i].is_finite() {
            out.push((scores[i], tp, fp));
        }
    }
    out
}

/// ROC curve with one point per distinct score (positive iff score >= threshold).
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Curve> {
    let (p, n) = check_scores(scores, labels)?;
    Curve::from_counts(CurveKind::Roc, p, n, threshold_counts(scores, labels))
}

/// Precision-recall curve with one point per distinct score.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<Curve> {
    let (p, n) = check_scores(scores, labels)?;
    Curve::from_counts(CurveKind::Pr, p, n, threshold_counts(scores, labels))
}

/// How [`auc`] integrates a curve.
pub fn auc_method(kind: CurveKind) -> &'static str {
    match kind {
        CurveKind::Roc => "trapezoid over achieved points, exact integer counts",
        CurveKind::Pr => "trapezoid over achieved points, flat extension to recall 0",
    }
}

/// Trapezoidal area under a curve.
///
/// ROC areas are accumulated on integer counts, which makes them equal to
/// the Mann-Whitney statistic bit for bit. PR areas start from recall 0 at
/// the precision of the first achieved point.
pub fn auc(curve: &Curve) -> f64 {
    match curve.kind {
        CurveKind::Roc => {
            let mut twice: i128 = 0;
            for w in curve.points.windows(2) {
                twice += (w[1].fp as i128 - w[0].fp as i128) * (w[1].tp + w[0].tp) as i128;
            }
            twice as f64 / (2 * curve.positives as i128 * curve.negatives as i128) as f64
        }
        CurveKind::Pr => {
            let Some(first) = curve.points.first() else {
                return 0.0;
            };
            let mut area = first.x * first.y;
            for w in curve.points.windows(2) {
                area += (w[1].x - w[0].x) * (w[0].y + w[1].y) / 2.0;
            }
            area
        }
    }
}

pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(auc(&roc_curve(scores, labels)?))
}

pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(auc(&pr_curve(scores, labels)?))
}

/// Binary predictions at score >= threshold.
pub fn classify(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s >= threshold).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Auprc,
    Auroc,
}

impl Statistic {
    fn eval(&self, scores: &[f64], labels: &[u8]) -> Result<f64> {
        match self {
            Statistic::Auprc => auprc(scores, labels),
            Statistic::Auroc => auroc(scores, labels),
        }
    }
}

/// Hour-ordered scores and labels of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredWindow {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub statistic: Statistic,
    pub block_hours: usize,
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            statistic: Statistic::Auprc,
            block_hours: 6,
            replicates: 10_000,
            level: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCI {
    pub statistic: Statistic,
    pub point: f64,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub block_hours: usize,
    pub replicates: usize,
    pub seed: u64,
    pub method: String,
    /// Replicates dropped because they contained a single class.
    pub skipped_replicates: usize,
    /// Set when fewer than 100 replicates were requested.
    pub low_replicate_warning: bool,
}

/// Circular block resample of one window: ceil(n / b) blocks with uniform
/// start hours, wrapping at the window end, truncated to n hours.
fn resample_window(len: usize, block: usize, rng: &mut ChaCha8Rng, out: &mut Vec<usize>) {
    let block = block.clamp(1, len.max(1));
    let mut taken = 0;
    while taken < len {
        let start = rng.random_range(0..len);
        for j in 0..block.min(len - taken) {
            out.push((start + j) % len);
        }
        taken += block;
    }
}

/// Linear-interpolation percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile confidence interval from a circular block bootstrap.
///
/// Blocks are drawn inside each window and never cross window boundaries;
/// the statistic is computed on the pooled resampled hours. Replicate `r`
/// uses its own ChaCha8 stream, so results do not depend on scheduling.
pub fn block_bootstrap_ci(windows: &[ScoredWindow], cfg: &BootstrapConfig) -> Result<BootstrapCI> {
    if cfg.block_hours == 0 {
        return Err(Error::invalid("block length must be at least one hour"));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level {} must lie in (0, 1)",
            cfg.level
        )));
    }
    if cfg.replicates == 0 {
        return Err(Error::invalid("need at least one bootstrap replicate"));
    }
    for w in windows {
        if w.scores.len() != w.labels.len() {
            return Err(Error::invalid("window scores and labels differ in length"));
        }
    }
    let all_scores: Vec<f64> = windows
        .iter()
        .flat_map(|w| w.scores.iter().copied())
        .collect();
    let all_labels: Vec<u8> = windows
        .iter()
        .flat_map(|w| w.labels.iter().copied())
        .collect();
    let point = cfg.statistic.eval(&all_scores, &all_labels)?;

    let results: Vec<Option<f64>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let mut scores = Vec::with_capacity(all_scores.len());
            let mut labels = Vec::with_capacity(all_scores.len());
            let mut idx = Vec::new();
            for w in windows {
                idx.clear();
                resample_window(w.scores.len(), cfg.block_hours, &mut rng, &mut idx);
                scores.extend(idx.iter().map(|&i| w.scores[i]));
                labels.extend(idx.iter().map(|&i| w.labels[i]));
            }
            let pos = labels.iter().filter(|&&y| y != 0).count();
            if pos == 0 || pos == labels.len() {
                return None;
            }
            cfg.statistic.eval(&scores, &labels).ok()
        })
        .collect();
    let mut stats: Vec<f64> = results.iter().flatten().copied().collect();
    let skipped = results.len() - stats.len();
    if stats.is_empty() {
        return Err(Error::invalid("every bootstrap replicate was single-class"));
    }
    stats.sort_by(f64::total_cmp);
    let alpha = 1.0 - cfg.level;
    Ok(BootstrapCI {
        statistic: cfg.statistic,
        point,
        level: cfg.level,
        lower: percentile(&stats, alpha / 2.0),
        upper: percentile(&stats, 1.0 - alpha / 2.0),
        block_hours: cfg.block_hours,
        replicates: cfg.replicates,
        seed: cfg.seed,
        method: "percentile, circular blocks within windows".to_string(),
        skipped_replicates: skipped,
        low_replicate_warning: cfg.replicates < 100,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Recall,
    Precision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub target_kind: TargetKind,
    pub target: f64,
    pub feasible: bool,
    pub threshold: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
}

/// For each target, the curve point whose recall (or precision) is closest
/// to the target from above. Artificial endpoints with infinite thresholds
/// are never selected.
pub fn operating_points(
    curve: &Curve,
    kind: TargetKind,
    targets: &[f64],
) -> Result<Vec<OperatingPoint>> {
    if let Some(t) = targets.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::invalid(format!("target {t} must lie in (0, 1]")));
    }
    let candidates: Vec<(f64, PointMetrics)> = curve
        .points
        .iter()
        .filter(|p| p.threshold.is_finite() && p.tp + p.fp > 0)
        .map(|p| (p.threshold, point_metrics(&curve.confusion_at(p))))
        .collect();
    Ok(targets
        .iter()
        .map(|&target| {
            let metric = |m: &PointMetrics| match kind {
                TargetKind::Recall => m.recall,
                TargetKind::Precision => m.precision,
            };
            let best = candidates
                .iter()
                .filter_map(|(thr, m)| metric(m).filter(|v| *v >= target).map(|v| (v, *thr, m)))
                .min_by(|a, b| {
                    a.0.total_cmp(&b.0).then_with(|| match kind {
                        // same recall: keep the stricter threshold
                        TargetKind::Recall => b.1.total_cmp(&a.1),
                        // same precision: keep the looser threshold
                        TargetKind::Precision => a.1.total_cmp(&b.1),
                    })
                });
            match best {
                Some((_, thr, m)) => OperatingPoint {
                    target_kind: kind,
                    target,
                    feasible: true,
                    threshold: Some(thr),
                    precision: m.precision,
                    recall: m.recall,
                    specificity: m.specificity,
                },
                None => OperatingPoint {
                    target_kind: kind,
                    target,
                    feasible: false,
                    threshold: None,
                    precision: None,
                    recall: None,
                    specificity: None,
                },
            }
        })
        .collect())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

/// Operating-point table: `model,target_kind,target,status,threshold,precision,recall,specificity`.
pub fn write_operating_points<W: Write>(
    writer: W,
    rows: &[(String, OperatingPoint)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "model",
        "target_kind",
        "target",
        "status",
        "threshold",
        "precision",
        "recall",
        "specificity",
    ])?;
    for (model, op) in rows {
        let kind = match op.target_kind {
            TargetKind::Recall => "recall",
            TargetKind::Precision => "precision",
        };
        if op.feasible {
            w.write_record([
                model.as_str(),
                kind,
                &op.target.to_string(),
                "ok",
                &cell(op.threshold),
                &cell(op.precision),
                &cell(op.recall),
                &cell(op.specificity),
            ])?;
        } else {
            w.write_record([
                model.as_str(),
                kind,
                &op.target.to_string(),
                "infeasible",
                "",
                "",
                "",
                "",
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptureRow {
    pub threshold: f64,
    pub captured: usize,
    pub missed: usize,
}

/// Thresholds 0.00, 0.01, ..., 1.00.
pub fn capture_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Per threshold, how many debris flows had at least one alert hour in the
/// `lead` hours up to and including the flow. Windows without a flow are ignored.
pub fn event_capture(
    windows: &[(Option<usize>, &[f64])],
    thresholds: &[f64],
    lead: usize,
) -> Result<Vec<CaptureRow>> {
    let mut peaks = Vec::new();
    for (flow, scores) in windows {
        let Some(d) = *flow else { continue };
        if d >= scores.len() {
            return Err(Error::invalid(format!(
                "debris flow hour {d} outside window of {} hours",
                scores.len()
            )));
        }
        peaks.push(
            scores[d.saturating_sub(lead)..=d]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
        );
    }
    Ok(thresholds
        .iter()
        .map(|&tau| {
            let captured = peaks.iter().filter(|&&p| p >= tau).count();
            CaptureRow {
                threshold: tau,
                captured,
                missed: peaks.len() - captured,
            }
        })
        .collect())
}

pub fn write_capture<W: Write>(writer: W, rows: &[CaptureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "captured", "missed"])?;
    for r in rows {
        w.write_record([
            format!("{:.2}", r.threshold),
            r.captured.to_string(),
            r.missed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
