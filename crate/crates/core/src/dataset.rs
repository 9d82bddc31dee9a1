//! Event windows, lead-time labels, feature vectors and window-level splits.
//!
//! A window holds about a week of antecedent rain, the main event and a short
//! tail. Positive windows are centred on a debris flow; negative windows on
//! qualifying rain events with no flow. Every hour of a window yields one
//! labeled example, and all splitting happens on whole windows so that hours
//! of one window never land on both sides of a split.

use std::collections::BTreeSet;
use std::io::Write;

use chrono::{DateTime, Datelike, Duration, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::format_timestamp;
use crate::matrix::FeatureMatrix;
use crate::rainfall::{
    daily_sums, DailyWindowMode, EarParams, EarProfile, EventParams, MainEvent, RainSeries,
};

/// Weight applied to the i-th daily total when daily features are weighted.
pub const DAILY_WEIGHT_BASE: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Positive,
    Negative,
}

/// A main event as seen from inside a window (indices relative to the window).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowEvent {
    pub start: usize,
    pub end: usize,
    /// Last hour of the confirming quiet period, clipped to the window.
    pub closed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetWindow {
    pub id: String,
    pub station_id: String,
    pub kind: WindowKind,
    /// Timestamp of the window's first hour.
    pub start: DateTime<Utc>,
    /// Index of the first hour in the source series.
    pub series_offset: usize,
    pub values: Vec<f64>,
    /// EAR per hour, computed on the full series; zero outside main events.
    pub ear: Vec<f64>,
    pub events: Vec<WindowEvent>,
    pub debris_flow_idx: Option<usize>,
    /// Calendar year of the window's main event, used for threshold lookup.
    pub year: i32,
}

impl DatasetWindow {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.start + Duration::hours(self.len() as i64 - 1)
    }

    pub fn first_hour_of_day(&self) -> u32 {
        use chrono::Timelike;
        self.start.hour()
    }

    pub fn is_positive(&self) -> bool {
        self.kind == WindowKind::Positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub antecedent_hours: usize,
    pub tail_hours: usize,
    /// Minimum run of consecutive above-threshold hours for a negative event.
    pub min_wet_run: usize,
    pub events: EventParams,
    pub ear: EarParams,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            antecedent_hours: 168,
            tail_hours: 24,
            min_wet_run: 2,
            events: EventParams::default(),
            ear: EarParams::default(),
        }
    }
}

/// Windows built from one station, plus debris flows that could not be used.
#[derive(Debug, Clone, Default)]
pub struct WindowBuild {
    pub windows: Vec<DatasetWindow>,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
struct Draft {
    core_start: usize,
    core_end: usize,
    lo: usize,
    hi: usize,
    kind: WindowKind,
    flow: Option<usize>,
}

fn longest_wet_run(values: &[f64], threshold: f64) -> usize {
    let mut best = 0;
    let mut run = 0;
    for &v in values {
        run = if v > threshold { run + 1 } else { 0 };
        best = best.max(run);
    }
    best
}

/// Builds positive and negative windows for one station.
///
/// Debris flows outside the series, or sharing a main event with an earlier
/// flow, are skipped and reported in [`WindowBuild::skipped`].
pub fn build_windows(
    series: &RainSeries,
    debris_flows: &[DateTime<Utc>],
    cfg: &WindowConfig,
) -> Result<WindowBuild> {
    let profile = EarProfile::compute(series, cfg.events, cfg.ear)?;
    let events: Vec<MainEvent> = profile.traces.iter().map(|t| t.event).collect();
    let last = series.len() - 1;
    let mut skipped = Vec::new();

    let mut flows: Vec<usize> = Vec::new();
    for &ts in debris_flows {
        match series.index_of(ts) {
            Some(i) => flows.push(i),
            None => {
                let msg = format!(
                    "station {}: debris flow at {} lies outside the rainfall record",
                    series.station_id(),
                    format_timestamp(ts)
                );
                log::warn!("{msg}");
                skipped.push(msg);
            }
        }
    }
    flows.sort_unstable();

    let mut drafts: Vec<Draft> = Vec::new();
    for d in flows {
        let containing = events
            .iter()
            .find(|e| e.start_idx <= d && d <= e.end_idx + cfg.events.quiet_hours)
            .or_else(|| {
                events
                    .iter()
                    .rev()
                    .find(|e| e.start_idx <= d && d <= e.end_idx + cfg.tail_hours)
            });
        let (core_start, core_end) = match containing {
            Some(e) => (e.start_idx, e.end_idx.max(d)),
            None => (d, d),
        };
        if let Some(prev) = drafts.last() {
            if core_start <= prev.core_end {
                let msg = format!(
                    "station {}: debris flow at {} shares a main event with an earlier flow",
                    series.station_id(),
                    format_timestamp(series.timestamp(d))
                );
                log::warn!("{msg}");
                skipped.push(msg);
                continue;
            }
        }
        drafts.push(Draft {
            core_start,
            core_end,
            lo: core_start.saturating_sub(cfg.antecedent_hours),
            hi: (core_end + cfg.tail_hours).min(last),
            kind: WindowKind::Positive,
            flow: Some(d),
        });
    }

    // Qualifying negative events clear of every positive window, merged when
    // the next one starts inside the current group's tail.
    let positives = drafts.clone();
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for e in &events {
        if longest_wet_run(
            &series.values()[e.start_idx..=e.end_idx],
            cfg.events.rain_threshold,
        ) < cfg.min_wet_run
        {
            continue;
        }
        if positives
            .iter()
            .any(|p| e.start_idx <= p.hi && p.lo <= e.end_idx)
        {
            continue;
        }
        match groups.last_mut() {
            Some(g) if e.start_idx <= g.1 + cfg.tail_hours => g.1 = e.end_idx,
            _ => groups.push((e.start_idx, e.end_idx)),
        }
    }
    drafts.extend(groups.into_iter().map(|(a, b)| Draft {
        core_start: a,
        core_end: b,
        lo: a.saturating_sub(cfg.antecedent_hours),
        hi: (b + cfg.tail_hours).min(last),
        kind: WindowKind::Negative,
        flow: None,
    }));
    drafts.sort_by_key(|d| d.core_start);

    // Resolve overlaps: the earlier window gives up tail, the later one antecedent.
    for i in 1..drafts.len() {
        let next_core = drafts[i].core_start;
        let prev = &mut drafts[i - 1];
        prev.hi = prev.hi.min(next_core - 1);
        let prev_hi = prev.hi;
        drafts[i].lo = drafts[i].lo.max(prev_hi + 1);
    }

    let windows = drafts
        .into_iter()
        .map(|d| {
            let events = events
                .iter()
                .zip(&profile.traces)
                .filter(|(e, _)| e.start_idx <= d.hi && d.lo <= e.end_idx)
                .map(|(e, t)| WindowEvent {
                    start: e.start_idx.max(d.lo) - d.lo,
                    end: e.end_idx.min(d.hi) - d.lo,
                    closed: t.closed_idx.min(d.hi) - d.lo,
                })
                .collect();
            let core_ts = series.timestamp(d.core_start);
            let tag = match d.kind {
                WindowKind::Positive => "P",
                WindowKind::Negative => "N",
            };
            DatasetWindow {
                id: format!(
                    "{}:{}:{}",
                    series.station_id(),
                    tag,
                    core_ts.format("%Y%m%dT%H")
                ),
                station_id: series.station_id().to_string(),
                kind: d.kind,
                start: series.timestamp(d.lo),
                series_offset: d.lo,
                values: series.values()[d.lo..=d.hi].to_vec(),
                ear: profile.hourly[d.lo..=d.hi].to_vec(),
                events,
                debris_flow_idx: d.flow.map(|f| f - d.lo),
                year: core_ts.year(),
            }
        })
        .collect();
    Ok(WindowBuild { windows, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelingConfig {
    pub lead_time_h: usize,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        Self { lead_time_h: 12 }
    }
}

impl LabelingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lead_time_h == 0 {
            return Err(Error::invalid("lead_time_h must be at least 1"));
        }
        Ok(())
    }
}

/// Per-hour labels: the flow hour and the `L` hours before it are positive.
pub fn label_hours(window: &DatasetWindow, cfg: &LabelingConfig) -> Vec<u8> {
    let mut labels = vec![0u8; window.len()];
    if let Some(d) = window.debris_flow_idx {
        for l in &mut labels[d.saturating_sub(cfg.lead_time_h)..=d] {
            *l = 1;
        }
    }
    labels
}

/// Which rainfall summaries make up a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSpec {
    pub hourly_hours: usize,
    pub daily_days: usize,
    pub daily_weighted: bool,
    pub include_ear: bool,
    pub daily_mode: DailyWindowMode,
    /// Drop the first `hourly_hours - 1` hours of each window instead of zero-padding them.
    pub skip_unpadded: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            hourly_hours: 48,
            daily_days: 0,
            daily_weighted: false,
            include_ear: false,
            daily_mode: DailyWindowMode::CalendarDay,
            skip_unpadded: false,
        }
    }
}

impl FeatureSpec {
    pub fn hourly(hours: usize) -> Self {
        Self {
            hourly_hours: hours,
            ..Self::default()
        }
    }

    pub fn n_features(&self) -> usize {
        self.hourly_hours + self.daily_days + usize::from(self.include_ear)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hourly_hours > 168 {
            return Err(Error::invalid(format!(
                "hourly_hours {} exceeds 168",
                self.hourly_hours
            )));
        }
        if self.daily_days > 7 {
            return Err(Error::invalid(format!(
                "daily_days {} exceeds 7",
                self.daily_days
            )));
        }
        if self.n_features() == 0 {
            return Err(Error::invalid("feature spec selects no features"));
        }
        Ok(())
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.hourly_hours)
            .map(|i| format!("hour_t-{i}"))
            .collect();
        let daily = if self.daily_weighted { "wday" } else { "day" };
        names.extend((1..=self.daily_days).map(|i| format!("{daily}_{i}")));
        if self.include_ear {
            names.push("ear".to_string());
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub window_id: String,
    pub station_id: String,
    /// Hour index inside the window.
    pub hour: usize,
    pub features: Vec<f64>,
    pub label: u8,
}

/// One example per window hour (fewer with `skip_unpadded`).
///
/// Hourly values run most-recent-first and are zero-padded before the window
/// start; daily totals cover whole days before the hourly block.
pub fn compose_features(
    window: &DatasetWindow,
    spec: &FeatureSpec,
    labeling: &LabelingConfig,
) -> Vec<LabeledExample> {
    let labels = label_hours(window, labeling);
    let h = spec.hourly_hours;
    let first = if spec.skip_unpadded {
        h.saturating_sub(1)
    } else {
        0
    };
    (first..window.len())
        .map(|t| {
            let mut f = Vec::with_capacity(spec.n_features());
            f.extend((0..h).map(|k| if k <= t { window.values[t - k] } else { 0.0 }));
            if spec.daily_days > 0 {
                let anchor = t as i64 + 1 - h as i64;
                let sums = daily_sums(
                    &window.values,
                    window.first_hour_of_day(),
                    anchor,
                    spec.daily_days,
                    spec.daily_mode,
                );
                f.extend(sums.into_iter().enumerate().map(|(i, s)| {
                    if spec.daily_weighted {
                        DAILY_WEIGHT_BASE.powi(i as i32 + 1) * s
                    } else {
                        s
                    }
                }));
            }
            if spec.include_ear {
                f.push(window.ear[t]);
            }
            LabeledExample {
                window_id: window.id.clone(),
                station_id: window.station_id.clone(),
                hour: t,
                features: f,
                label: labels[t],
            }
        })
        .collect()
}

/// Examples from many windows, with feature names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub examples: Vec<LabeledExample>,
}

impl Dataset {
    pub fn build(
        windows: &[&DatasetWindow],
        spec: &FeatureSpec,
        labeling: &LabelingConfig,
    ) -> Result<Self> {
        spec.validate()?;
        labeling.validate()?;
        Ok(Self {
            feature_names: spec.feature_names(),
            examples: windows
                .iter()
                .flat_map(|w| compose_features(w, spec, labeling))
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn matrix(&self) -> FeatureMatrix {
        let n_cols = self.feature_names.len();
        let data = self
            .examples
            .iter()
            .flat_map(|e| e.features.iter().copied())
            .collect();
        FeatureMatrix::new(self.examples.len(), n_cols, data).expect("examples match feature spec")
    }

    pub fn labels(&self) -> Vec<u8> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Feature matrix export: `window_id,hour,label,f0..f{n-1}`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![
            "window_id".to_string(),
            "hour".to_string(),
            "label".to_string(),
        ];
        header.extend((0..self.feature_names.len()).map(|i| format!("f{i}")));
        w.write_record(&header)?;
        for e in &self.examples {
            let mut rec = vec![e.window_id.clone(), e.hour.to_string(), e.label.to_string()];
            rec.extend(e.features.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Manifest entry describing a window without its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowManifestEntry {
    pub id: String,
    pub station_id: String,
    pub kind: WindowKind,
    pub start: String,
    pub end: String,
    pub debris_flow_idx: Option<usize>,
}

impl From<&DatasetWindow> for WindowManifestEntry {
    fn from(w: &DatasetWindow) -> Self {
        Self {
            id: w.id.clone(),
            station_id: w.station_id.clone(),
            kind: w.kind,
            start: format_timestamp(w.start),
            end: format_timestamp(w.end()),
            debris_flow_idx: w.debris_flow_idx,
        }
    }
}

/// Something that can be split at window granularity.
pub trait Stratum {
    fn key(&self) -> &str;
    fn positive(&self) -> bool;
}

impl Stratum for DatasetWindow {
    fn key(&self) -> &str {
        &self.id
    }

    fn positive(&self) -> bool {
        self.is_positive()
    }
}

impl<T: Stratum> Stratum for &T {
    fn key(&self) -> &str {
        (*self).key()
    }

    fn positive(&self) -> bool {
        (*self).positive()
    }
}

/// Indices of each class, ordered by key and then shuffled with `seed`.
fn shuffled_classes<T: Stratum>(items: &[T], seed: u64) -> Result<[Vec<usize>; 2]> {
    let keys: BTreeSet<&str> = items.iter().map(Stratum::key).collect();
    if keys.len() != items.len() {
        return Err(Error::invalid("window identifiers are not unique"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = [Vec::new(), Vec::new()];
    for (slot, want) in out.iter_mut().zip([true, false]) {
        let mut idx: Vec<usize> = (0..items.len())
            .filter(|&i| items[i].positive() == want)
            .collect();
        idx.sort_by(|&a, &b| items[a].key().cmp(items[b].key()));
        idx.shuffle(&mut rng);
        *slot = idx;
    }
    Ok(out)
}

/// Stratified train/test split; returns sorted (train, test) indices.
pub fn split_windows<T: Stratum>(
    items: &[T],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test_fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    if items.len() < 2 {
        return Err(Error::invalid("need at least two windows to split"));
    }
    let classes = shuffled_classes(items, seed)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for idx in &classes {
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    if test.is_empty() {
        test.push(train.pop().expect("at least two windows"));
    } else if train.is_empty() {
        train.push(test.pop().expect("at least two windows"));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified k-fold partition of window indices (each fold sorted).
pub fn kfold_windows<T: Stratum>(items: &[T], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid(format!("k = {k}: need at least two folds")));
    }
    if k > items.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {} available windows",
            items.len()
        )));
    }
    let classes = shuffled_classes(items, seed)?;
    let mut folds = vec![Vec::new(); k];
    for (n, i) in classes.iter().flatten().enumerate() {
        folds[n % k].push(*i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
