//! EAR threshold warning rules: per-station thresholds (ETM) and one
//! uniform threshold (HM), plus the threshold sweeps behind their curves.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetWindow;
use crate::error::{Error, Result};
use crate::metrics::{ConfusionCounts, Curve, CurveKind};
use crate::rainfall::EarTrace;

pub const THRESHOLD_HEADER: [&str; 3] = ["station_id", "year", "ear_threshold_mm"];

/// Thresholds marked at 50 mm steps between 200 and 600 mm.
pub const MARKED_THRESHOLDS: [f64; 9] = [
    200.0, 250.0, 300.0, 350.0, 400.0, 450.0, 500.0, 550.0, 600.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    Official,
    Swept,
}

/// EAR thresholds per (station, year).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub kind: TableKind,
    entries: BTreeMap<(String, i32), f64>,
}

impl ThresholdTable {
    pub fn new(kind: TableKind, entries: BTreeMap<(String, i32), f64>) -> Result<Self> {
        for ((station, year), &thr) in &entries {
            let ok = match kind {
                TableKind::Official => {
                    (200.0..=600.0).contains(&thr) && (thr / 50.0).fract() == 0.0
                }
                TableKind::Swept => thr.is_finite() && thr > 0.0,
            };
            if !ok {
                return Err(Error::invalid(format!(
                    "threshold {thr} mm for station {station} ({year}) is not valid for a {kind:?} table"
                )));
            }
        }
        Ok(Self { kind, entries })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, i32, f64)> {
        self.entries.iter().map(|((s, y), t)| (s.as_str(), *y, *t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Threshold for a station in a year; falls back to the latest earlier
    /// year, then the earliest later one. `None` if the station has no entry.
    pub fn threshold_for(&self, station: &str, year: i32) -> Option<f64> {
        let key = (station.to_string(), year);
        if let Some(t) = self.entries.get(&key) {
            return Some(*t);
        }
        let lo = (station.to_string(), i32::MIN);
        let hi = (station.to_string(), i32::MAX);
        let in_station = self.entries.range(lo..=hi);
        let mut before = None;
        let mut after = None;
        for ((_, y), t) in in_station {
            if *y < year {
                before = Some(*t);
            } else if after.is_none() {
                after = Some(*t);
            }
        }
        before.or(after)
    }

    /// Every threshold multiplied by `scale` (a swept table).
    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            kind: TableKind::Swept,
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v * scale))
                .collect(),
        }
    }

    pub fn read_csv(path: &Path, kind: TableKind) -> Result<Self> {
        let file = File::open(path)
            .map_err(|e| Error::format(path, format!("cannot open threshold table: {e}")))?;
        let mut rdr = csv::Reader::from_reader(file);
        let header: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if header != THRESHOLD_HEADER {
            return Err(Error::format(
                path,
                format!(
                    "expected header `{}`, found `{}`",
                    THRESHOLD_HEADER.join(","),
                    header.join(",")
                ),
            ));
        }
        let mut entries = BTreeMap::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::format(path, format!("line {}: bad {what}", line + 2));
            let year: i32 = rec[1].trim().parse().map_err(|_| bad("year"))?;
            let thr: f64 = rec[2].trim().parse().map_err(|_| bad("ear_threshold_mm"))?;
            if entries
                .insert((rec[0].trim().to_string(), year), thr)
                .is_some()
            {
                return Err(bad("duplicate station/year"));
            }
        }
        Self::new(kind, entries).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(THRESHOLD_HEADER)?;
        for (s, y, t) in self.entries() {
            w.write_record([s, &y.to_string(), &t.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// How alerts are issued from an EAR trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AlertPolicy {
    /// Keep the alert on from the first crossing until the event is declared
    /// over (its confirming quiet period has elapsed).
    pub latch: bool,
    /// Require EAR strictly above the threshold instead of at or above it.
    pub strict: bool,
}

impl AlertPolicy {
    fn crosses(&self, ear: f64, threshold: f64) -> bool {
        if self.strict {
            ear > threshold
        } else {
            ear >= threshold
        }
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(Error::invalid(format!(
            "EAR threshold {threshold} must be finite and non-negative"
        )));
    }
    Ok(())
}

/// Alerts over the hours of one main event.
pub fn etm_predict(trace: &EarTrace, threshold: f64, policy: AlertPolicy) -> Result<Vec<bool>> {
    check_threshold(threshold)?;
    let mut fired = false;
    Ok(trace
        .ear
        .iter()
        .map(|&e| {
            let hit = policy.crosses(e, threshold);
            fired |= hit;
            hit || (policy.latch && fired)
        })
        .collect())
}

/// The HM rule is the ETM rule with one threshold shared by every station.
pub fn hm_predict(
    trace: &EarTrace,
    uniform_threshold: f64,
    policy: AlertPolicy,
) -> Result<Vec<bool>> {
    etm_predict(trace, uniform_threshold, policy)
}

/// Hourly alerts over a dataset window. `None` (no threshold established)
/// never alerts.
pub fn alert_window(
    window: &DatasetWindow,
    threshold: Option<f64>,
    policy: AlertPolicy,
) -> Vec<bool> {
    let mut out = vec![false; window.len()];
    let Some(threshold) = threshold else {
        return out;
    };
    for ev in &window.events {
        let first = (ev.start..=ev.end).find(|&t| policy.crosses(window.ear[t], threshold));
        let Some(first) = first else { continue };
        if policy.latch {
            out[first..=ev.closed.max(ev.end)].fill(true);
        } else {
            for (o, &e) in out[first..=ev.end]
                .iter_mut()
                .zip(&window.ear[first..=ev.end])
            {
                *o = policy.crosses(e, threshold);
            }
        }
    }
    out
}

/// Per-window ETM thresholds from a table.
pub fn window_thresholds(table: &ThresholdTable, windows: &[&DatasetWindow]) -> Vec<Option<f64>> {
    windows
        .iter()
        .map(|w| {
            let t = table.threshold_for(&w.station_id, w.year);
            if t.is_none() {
                log::debug!(
                    "station {} has no EAR threshold; ETM never alerts there",
                    w.station_id
                );
            }
            t
        })
        .collect()
}

/// One sweep setting (a threshold scale for ETM, a threshold in mm for HM)
/// and the per-window hourly alerts it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub predictions: Vec<Vec<bool>>,
}

/// Scales 0, step, 2*step, ... up to the first scale at which nothing alerts.
pub fn etm_scales(
    table: &ThresholdTable,
    windows: &[&DatasetWindow],
    scale_step: f64,
) -> Result<Vec<f64>> {
    if !(scale_step > 0.0) {
        return Err(Error::invalid("scale step must be positive"));
    }
    let thresholds = window_thresholds(table, windows);
    let max_ratio = windows
        .iter()
        .zip(&thresholds)
        .filter_map(|(w, t)| t.map(|t| w.ear.iter().copied().fold(0.0, f64::max) / t))
        .fold(0.0, f64::max);
    let last = (max_ratio / scale_step).floor() as usize + 1;
    Ok((0..=last).map(|k| k as f64 * scale_step).collect())
}

/// Calls `visit(scale, predictions)` for every ETM sweep scale.
pub fn for_each_etm_scale(
    table: &ThresholdTable,
    windows: &[&DatasetWindow],
    scale_step: f64,
    policy: AlertPolicy,
    mut visit: impl FnMut(f64, &[Vec<bool>]),
) -> Result<()> {
    let thresholds = window_thresholds(table, windows);
    for scale in etm_scales(table, windows, scale_step)? {
        let preds: Vec<Vec<bool>> = windows
            .iter()
            .zip(&thresholds)
            .map(|(w, t)| alert_window(w, t.map(|t| t * scale), policy))
            .collect();
        visit(scale, &preds);
    }
    Ok(())
}

/// ETM sweep: every station threshold multiplied by a common scale.
pub fn sweep_etm(
    table: &ThresholdTable,
    windows: &[&DatasetWindow],
    scale_step: f64,
    policy: AlertPolicy,
) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for_each_etm_scale(table, windows, scale_step, policy, |value, p| {
        out.push(SweepPoint {
            value,
            predictions: p.to_vec(),
        })
    })?;
    Ok(out)
}

/// HM thresholds: `steps` even steps from 0 to `max_ear`, plus the marked
/// 200..600 mm values, ascending and deduplicated.
pub fn hm_thresholds(max_ear: f64, steps: usize) -> Result<Vec<f64>> {
    if !(max_ear >= 0.0) || steps == 0 {
        return Err(Error::invalid(
            "HM sweep needs max_ear >= 0 and at least one step",
        ));
    }
    let mut t: Vec<f64> = (0..=steps)
        .map(|k| max_ear * k as f64 / steps as f64)
        .collect();
    t.extend(MARKED_THRESHOLDS);
    t.sort_by(f64::total_cmp);
    t.dedup();
    Ok(t)
}

pub fn for_each_hm_threshold(
    windows: &[&DatasetWindow],
    max_ear: f64,
    steps: usize,
    policy: AlertPolicy,
    mut visit: impl FnMut(f64, &[Vec<bool>]),
) -> Result<()> {
    for thr in hm_thresholds(max_ear, steps)? {
        let preds: Vec<Vec<bool>> = windows
            .iter()
            .map(|w| alert_window(w, Some(thr), policy))
            .collect();
        visit(thr, &preds);
    }
    Ok(())
}

pub fn sweep_hm(
    windows: &[&DatasetWindow],
    max_ear: f64,
    steps: usize,
    policy: AlertPolicy,
) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for_each_hm_threshold(windows, max_ear, steps, policy, |value, p| {
        out.push(SweepPoint {
            value,
            predictions: p.to_vec(),
        })
    })?;
    Ok(out)
}

/// Largest EAR over a set of windows.
pub fn max_ear(windows: &[&DatasetWindow]) -> f64 {
    windows
        .iter()
        .flat_map(|w| w.ear.iter().copied())
        .fold(0.0, f64::max)
}

/// Confusion counts of per-window predictions against per-window labels.
pub fn pooled_confusion(labels: &[Vec<u8>], predictions: &[Vec<bool>]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (ls, ps) in labels.iter().zip(predictions) {
        for (&y, &p) in ls.iter().zip(ps) {
            match (y != 0, p) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
    }
    c
}

/// ROC or PR curve of a sweep given as `(value, counts)` in ascending value
/// order (higher value = fewer alerts).
pub fn sweep_curve(kind: CurveKind, counts: &[(f64, ConfusionCounts)]) -> Result<Curve> {
    let Some((_, first)) = counts.first() else {
        return Err(Error::invalid("empty sweep"));
    };
    let positives = first.tp + first.fn_;
    let negatives = first.fp + first.tn;
    Curve::from_counts(
        kind,
        positives,
        negatives,
        counts.iter().rev().map(|(v, c)| (*v, c.tp, c.fp)),
    )
}

/// Continuous per-hour ETM score: EAR divided by the station threshold inside
/// main events, `-inf` where the rule can never alert.
pub fn etm_scores(window: &DatasetWindow, threshold: Option<f64>) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; window.len()];
    if let Some(t) = threshold {
        for ev in &window.events {
            for (o, &e) in out[ev.start..=ev.end]
                .iter_mut()
                .zip(&window.ear[ev.start..=ev.end])
            {
                *o = e / t;
            }
        }
    }
    out
}

/// Continuous per-hour HM score: EAR inside main events, `-inf` elsewhere.
pub fn hm_scores(window: &DatasetWindow) -> Vec<f64> {
    etm_scores(window, Some(1.0))
}

#[cfg(test)]
mod tests {
    use chrono::{TimeZone, Utc};

    use super::*;
    use crate::dataset::{WindowEvent, WindowKind};
    use crate::rainfall::{DailyWindowMode, MainEvent};

    fn trace(ear: Vec<f64>) -> EarTrace {
        EarTrace {
            event: MainEvent {
                start_idx: 0,
                end_idx: ear.len() - 1,
            },
            antecedent_index: 0.0,
            closed_idx: ear.len() - 1,
            ear,
            alpha: 0.7,
            daily_window_mode: DailyWindowMode::CalendarDay,
        }
    }

    fn window(ear: Vec<f64>, events: Vec<WindowEvent>) -> DatasetWindow {
        DatasetWindow {
            id: "W".into(),
            station_id: "S1".into(),
            kind: WindowKind::Negative,
            start: Utc.with_ymd_and_hms(2020, 6, 1, 0, 0, 0).unwrap(),
            series_offset: 0,
            values: vec![0.0; ear.len()],
            ear,
            events,
            debris_flow_idx: None,
            year: 2020,
        }
    }

    #[test]
    fn etm_examples() {
        let tr = trace(vec![100.0, 250.0, 310.0]);
        let p = etm_predict(&tr, 300.0, AlertPolicy::default()).unwrap();
        assert_eq!(p, vec![false, false, true]);
        assert_eq!(
            etm_predict(&tr, 1e-9, AlertPolicy::default()).unwrap(),
            vec![true; 3]
        );
        assert_eq!(
            etm_predict(&tr, 1000.0, AlertPolicy::default()).unwrap(),
            vec![false; 3]
        );
        assert_eq!(hm_predict(&tr, 300.0, AlertPolicy::default()).unwrap(), p);
        let strict = AlertPolicy {
            strict: true,
            ..AlertPolicy::default()
        };
        assert_eq!(etm_predict(&tr, 310.0, strict).unwrap(), vec![false; 3]);
        assert!(etm_predict(&tr, f64::NAN, AlertPolicy::default()).is_err());
    }

    #[test]
    fn latch_extends_through_quiet_period() {
        let mut ear = vec![0.0; 12];
        ear[2..5].copy_from_slice(&[50.0, 120.0, 130.0]);
        let w = window(
            ear,
            vec![WindowEvent {
                start: 2,
                end: 4,
                closed: 10,
            }],
        );
        let plain = alert_window(&w, Some(100.0), AlertPolicy::default());
        assert_eq!(plain.iter().filter(|&&b| b).count(), 2);
        let latched = alert_window(
            &w,
            Some(100.0),
            AlertPolicy {
                latch: true,
                ..AlertPolicy::default()
            },
        );
        assert_eq!(latched.iter().filter(|&&b| b).count(), 8);
        assert!(plain.iter().zip(&latched).all(|(p, l)| !p || *l));
        assert!(alert_window(&w, None, AlertPolicy::default())
            .iter()
            .all(|b| !b));
    }

    #[test]
    fn table_validation_and_lookup() {
        let mut e = BTreeMap::new();
        e.insert(("A".to_string(), 2018), 250.0);
        e.insert(("A".to_string(), 2020), 300.0);
        let t = ThresholdTable::new(TableKind::Official, e.clone()).unwrap();
        assert_eq!(t.threshold_for("A", 2020), Some(300.0));
        assert_eq!(t.threshold_for("A", 2019), Some(250.0));
        assert_eq!(t.threshold_for("A", 2015), Some(250.0));
        assert_eq!(t.threshold_for("A", 2022), Some(300.0));
        assert_eq!(t.threshold_for("B", 2020), None);
        e.insert(("B".to_string(), 2020), 275.0);
        assert!(ThresholdTable::new(TableKind::Official, e.clone()).is_err());
        assert!(ThresholdTable::new(TableKind::Swept, e).is_ok());
    }

    #[test]
    fn threshold_csv_round_trip() {
        let mut e = BTreeMap::new();
        e.insert(("A".to_string(), 2018), 250.0);
        e.insert(("B".to_string(), 2019), 600.0);
        let t = ThresholdTable::new(TableKind::Official, e).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        t.write_csv(File::create(&path).unwrap()).unwrap();
        assert_eq!(
            ThresholdTable::read_csv(&path, TableKind::Official).unwrap(),
            t
        );
    }

    #[test]
    fn sweep_endpoints() {
        let mut ear = vec![0.0; 6];
        ear[1..4].copy_from_slice(&[100.0, 200.0, 350.0]);
        let w = window(
            ear,
            vec![WindowEvent {
                start: 1,
                end: 3,
                closed: 5,
            }],
        );
        let mut e = BTreeMap::new();
        e.insert(("S1".to_string(), 2020), 300.0);
        let table = ThresholdTable::new(TableKind::Official, e).unwrap();
        let ws = [&w];
        let sweep = sweep_etm(&table, &ws, 0.001, AlertPolicy::default()).unwrap();
        assert_eq!(sweep[0].value, 0.0);
        assert_eq!(
            sweep[0].predictions[0],
            vec![false, true, true, true, false, false]
        );
        let at_one = sweep.iter().find(|p| p.value == 1.0).unwrap();
        assert_eq!(
            at_one.predictions[0],
            alert_window(&w, Some(300.0), AlertPolicy::default())
        );
        assert!(sweep.last().unwrap().predictions[0].iter().all(|b| !b));

        let hm = hm_thresholds(350.0, 7).unwrap();
        for m in MARKED_THRESHOLDS {
            assert!(hm.contains(&m));
        }
        assert_eq!(hm[0], 0.0);
    }
}
