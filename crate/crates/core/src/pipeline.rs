//! Glue between the stages: corpus to windows, models and baselines to
//! per-window scores, sweeps to curves.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    etm_scores, for_each_etm_scale, for_each_hm_threshold, hm_scores, max_ear, pooled_confusion,
    sweep_curve, window_thresholds, AlertPolicy, ThresholdTable,
};
use crate::dataset::{
    build_windows, compose_features, label_hours, DatasetWindow, FeatureSpec, LabelingConfig,
    WindowConfig,
};
use crate::error::{Error, Result};
use crate::io::DebrisEvent;
use crate::matrix::FeatureMatrix;
use crate::metrics::{Curve, CurveKind, ScoredWindow};
use crate::models::{predict_proba, Model};
use crate::rainfall::RainSeries;

#[derive(Debug, Clone, Default)]
pub struct CorpusWindows {
    pub windows: Vec<DatasetWindow>,
    /// Debris flows that could not be turned into a window, with reasons.
    pub skipped: Vec<String>,
}

impl CorpusWindows {
    pub fn refs(&self) -> Vec<&DatasetWindow> {
        self.windows.iter().collect()
    }

    pub fn count(&self) -> (usize, usize) {
        let p = self.windows.iter().filter(|w| w.is_positive()).count();
        (p, self.windows.len() - p)
    }

    pub fn select(&self, idx: &[usize]) -> Vec<&DatasetWindow> {
        idx.iter().map(|&i| &self.windows[i]).collect()
    }
}

/// Windows for every station, in station order.
pub fn corpus_windows(
    series: &[RainSeries],
    events: &[DebrisEvent],
    cfg: &WindowConfig,
) -> Result<CorpusWindows> {
    let mut by_station: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for e in events {
        by_station
            .entry(e.station_id.as_str())
            .or_default()
            .push(e.timestamp);
    }
    let mut skipped = Vec::new();
    for (station, flows) in &by_station {
        if !series.iter().any(|s| s.station_id() == *station) {
            let msg = format!(
                "{} debris flow(s) at station {station}, which has no rainfall record",
                flows.len()
            );
            log::warn!("{msg}");
            skipped.push(msg);
        }
    }
    let builds = series
        .par_iter()
        .map(|s| {
            let flows = by_station
                .get(s.station_id())
                .map_or(&[][..], Vec::as_slice);
            build_windows(s, flows, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut windows = Vec::new();
    for b in builds {
        windows.extend(b.windows);
        skipped.extend(b.skipped);
    }
    Ok(CorpusWindows { windows, skipped })
}

/// Scores, labels and debris-flow hour of one window, aligned hour by hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowScores {
    pub window_id: String,
    /// Window hour of the first score.
    pub first_hour: usize,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    /// Debris-flow position within `scores`.
    pub flow: Option<usize>,
}

impl WindowScores {
    fn new(w: &DatasetWindow, first_hour: usize, scores: Vec<f64>, labels: Vec<u8>) -> Self {
        Self {
            window_id: w.id.clone(),
            first_hour,
            flow: w.debris_flow_idx.and_then(|d| d.checked_sub(first_hour)),
            scores,
            labels,
        }
    }

    pub fn scored(&self) -> ScoredWindow {
        ScoredWindow {
            scores: self.scores.clone(),
            labels: self.labels.clone(),
        }
    }
}

pub fn model_scores(
    model: &Model,
    windows: &[&DatasetWindow],
    spec: &FeatureSpec,
    labeling: &LabelingConfig,
) -> Result<Vec<WindowScores>> {
    spec.validate()?;
    labeling.validate()?;
    windows
        .par_iter()
        .map(|w| {
            let ex = compose_features(w, spec, labeling);
            let first = ex.first().map_or(w.len(), |e| e.hour);
            let rows: Vec<&[f64]> = ex.iter().map(|e| e.features.as_slice()).collect();
            let x = FeatureMatrix::from_rows(&rows)?;
            let scores = if ex.is_empty() {
                Vec::new()
            } else {
                predict_proba(model, &x)?
            };
            Ok(WindowScores::new(
                w,
                first,
                scores,
                ex.iter().map(|e| e.label).collect(),
            ))
        })
        .collect()
}

pub fn hm_window_scores(
    windows: &[&DatasetWindow],
    labeling: &LabelingConfig,
) -> Vec<WindowScores> {
    windows
        .iter()
        .map(|w| WindowScores::new(w, 0, hm_scores(w), label_hours(w, labeling)))
        .collect()
}

pub fn etm_window_scores(
    table: &ThresholdTable,
    windows: &[&DatasetWindow],
    labeling: &LabelingConfig,
) -> Vec<WindowScores> {
    windows
        .iter()
        .zip(window_thresholds(table, windows))
        .map(|(w, t)| WindowScores::new(w, 0, etm_scores(w, t), label_hours(w, labeling)))
        .collect()
}

/// All hours of all windows, concatenated.
pub fn pooled(scores: &[WindowScores]) -> (Vec<f64>, Vec<u8>) {
    let s = scores
        .iter()
        .flat_map(|w| w.scores.iter().copied())
        .collect();
    let l = scores
        .iter()
        .flat_map(|w| w.labels.iter().copied())
        .collect();
    (s, l)
}

/// ROC and PR curves of the HM threshold sweep.
pub fn hm_sweep_curves(
    windows: &[&DatasetWindow],
    labeling: &LabelingConfig,
    steps: usize,
    policy: AlertPolicy,
) -> Result<(Curve, Curve)> {
    let labels: Vec<Vec<u8>> = windows.iter().map(|w| label_hours(w, labeling)).collect();
    let mut counts = Vec::new();
    for_each_hm_threshold(windows, max_ear(windows), steps, policy, |v, p| {
        counts.push((v, pooled_confusion(&labels, p)));
    })?;
    curves_from(&counts)
}

/// ROC and PR curves of the ETM threshold-scale sweep.
pub fn etm_sweep_curves(
    table: &ThresholdTable,
    windows: &[&DatasetWindow],
    labeling: &LabelingConfig,
    scale_step: f64,
    policy: AlertPolicy,
) -> Result<(Curve, Curve)> {
    let labels: Vec<Vec<u8>> = windows.iter().map(|w| label_hours(w, labeling)).collect();
    let mut counts = Vec::new();
    for_each_etm_scale(table, windows, scale_step, policy, |v, p| {
        counts.push((v, pooled_confusion(&labels, p)));
    })?;
    curves_from(&counts)
}

fn curves_from(counts: &[(f64, crate::metrics::ConfusionCounts)]) -> Result<(Curve, Curve)> {
    if counts.is_empty() {
        return Err(Error::invalid("threshold sweep produced no points"));
    }
    Ok((
        sweep_curve(CurveKind::Roc, counts)?,
        sweep_curve(CurveKind::Pr, counts)?,
    ))
}
