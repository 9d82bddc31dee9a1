//! Hourly rainfall records, main-rainfall-event segmentation and the
//! effective accumulated rainfall (EAR).
//!
//! EAR at hour `t` of a main event is the rain accumulated since the event
//! started plus an antecedent index built from the seven daily totals that
//! precede the event's first hour, each discounted by `alpha^i`.

use chrono::{DateTime, Duration, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hourly rain above this value (mm) starts or extends a main event.
pub const RAIN_THRESHOLD_MM: f64 = 4.0;
/// Sub-threshold hours needed after the last wet hour to close an event.
pub const QUIET_HOURS: usize = 6;
/// Daily decay factor of the antecedent index.
pub const DEFAULT_ALPHA: f64 = 0.7;
/// Number of antecedent days in the EAR.
pub const ANTECEDENT_DAYS: usize = 7;

/// Gap-free hourly rainfall record of one station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RainSeries {
    station_id: String,
    start: DateTime<Utc>,
    values: Vec<f64>,
}

impl RainSeries {
    pub fn new(
        station_id: impl Into<String>,
        start: DateTime<Utc>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let station_id = station_id.into();
        if values.is_empty() {
            return Err(Error::invalid(format!(
                "station {station_id}: empty rainfall series"
            )));
        }
        if start.minute() != 0 || start.second() != 0 || start.nanosecond() != 0 {
            return Err(Error::invalid(format!(
                "station {station_id}: series start {start} is not hour-aligned"
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::invalid(format!(
                "station {station_id}: hour {i} has invalid rainfall {v}"
            )));
        }
        Ok(Self {
            station_id,
            start,
            values,
        })
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn timestamp(&self, idx: usize) -> DateTime<Utc> {
        self.start + Duration::hours(idx as i64)
    }

    /// Index of the hour starting at `ts`, if it lies inside the series.
    pub fn index_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        let delta = ts.signed_duration_since(self.start);
        if delta.num_seconds() % 3600 != 0 {
            return None;
        }
        let h = delta.num_hours();
        (h >= 0 && (h as usize) < self.values.len()).then_some(h as usize)
    }

    /// Hour of day (UTC) of the series' first value.
    pub fn first_hour_of_day(&self) -> u32 {
        self.start.hour()
    }

    /// Copy of the series with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.station_id.clone(),
            self.start,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }
}

/// A main rainfall event, as inclusive hour indices into its series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MainEvent {
    pub start_idx: usize,
    pub end_idx: usize,
}

impl MainEvent {
    pub fn len(&self) -> usize {
        self.end_idx - self.start_idx + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, idx: usize) -> bool {
        (self.start_idx..=self.end_idx).contains(&idx)
    }
}

/// Segmentation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventParams {
    pub rain_threshold: f64,
    pub quiet_hours: usize,
}

impl Default for EventParams {
    fn default() -> Self {
        Self {
            rain_threshold: RAIN_THRESHOLD_MM,
            quiet_hours: QUIET_HOURS,
        }
    }
}

/// How the antecedent daily totals are windowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DailyWindowMode {
    /// Full calendar days (00:00 to 24:00 UTC) before the day containing the anchor.
    #[default]
    CalendarDay,
    /// Consecutive 24-hour blocks ending just before the anchor hour.
    Rolling24h,
}

/// EAR settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EarParams {
    pub alpha: f64,
    pub mode: DailyWindowMode,
}

impl Default for EarParams {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            mode: DailyWindowMode::CalendarDay,
        }
    }
}

/// Splits a series into maximal main events.
///
/// An event opens at an hour strictly above `rain_threshold` and closes at
/// the last such hour once `quiet_hours` consecutive hours at or below the
/// threshold follow it. An event still open at series end closes at its last
/// wet hour.
pub fn segment_events(series: &RainSeries, params: EventParams) -> Vec<MainEvent> {
    segment_values(series.values(), params)
}

pub(crate) fn segment_values(values: &[f64], params: EventParams) -> Vec<MainEvent> {
    let mut events = Vec::new();
    let mut open: Option<MainEvent> = None;
    for (i, &v) in values.iter().enumerate() {
        if v <= params.rain_threshold {
            continue;
        }
        open = Some(match open {
            Some(ev) if i - ev.end_idx - 1 < params.quiet_hours => MainEvent {
                start_idx: ev.start_idx,
                end_idx: i,
            },
            Some(ev) => {
                events.push(ev);
                MainEvent {
                    start_idx: i,
                    end_idx: i,
                }
            }
            None => MainEvent {
                start_idx: i,
                end_idx: i,
            },
        });
    }
    events.extend(open);
    events
}

/// Daily rainfall totals `R_1..R_days` preceding `anchor_idx`.
///
/// Hours before the series start count as 0 mm.
pub fn daily_totals(
    series: &RainSeries,
    anchor_idx: usize,
    days: usize,
    mode: DailyWindowMode,
) -> Result<Vec<f64>> {
    if anchor_idx >= series.len() {
        return Err(Error::invalid(format!(
            "anchor hour {anchor_idx} outside series of {} hours",
            series.len()
        )));
    }
    Ok(daily_sums(
        series.values(),
        series.first_hour_of_day(),
        anchor_idx as i64,
        days,
        mode,
    ))
}

/// Like [`daily_totals`] but over a raw slice whose first hour has hour of
/// day `first_hour`; `anchor` may lie outside the slice.
pub(crate) fn daily_sums(
    values: &[f64],
    first_hour: u32,
    anchor: i64,
    days: usize,
    mode: DailyWindowMode,
) -> Vec<f64> {
    // Both modes reduce to summing 24-h blocks that end at `boundary`.
    let boundary = match mode {
        DailyWindowMode::Rolling24h => anchor,
        DailyWindowMode::CalendarDay => {
            let hour_of_day = (first_hour as i64 + anchor).rem_euclid(24);
            anchor - hour_of_day
        }
    };
    (1..=days as i64)
        .map(|i| {
            let lo = (boundary - 24 * i).clamp(0, values.len() as i64) as usize;
            let hi = (boundary - 24 * (i - 1)).clamp(0, values.len() as i64) as usize;
            if lo >= hi {
                0.0
            } else {
                values[lo..hi].iter().sum()
            }
        })
        .collect()
}

/// `sum_{i>=1} alpha^i * dailies[i-1]`.
pub fn antecedent_index(dailies: &[f64], alpha: f64) -> f64 {
    dailies
        .iter()
        .enumerate()
        .map(|(i, r)| alpha.powi(i as i32 + 1) * r)
        .sum()
}

/// EAR trajectory over one main event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarTrace {
    pub event: MainEvent,
    pub antecedent_index: f64,
    /// `ear[t]` is the EAR at hour `event.start_idx + t`.
    pub ear: Vec<f64>,
    pub alpha: f64,
    pub daily_window_mode: DailyWindowMode,
    /// Last hour of the quiet period that confirms the event is over
    /// (clipped at series end).
    pub closed_idx: usize,
}

impl EarTrace {
    pub fn max_ear(&self) -> f64 {
        self.ear.last().copied().unwrap_or(0.0)
    }
}

pub fn ear_trace(series: &RainSeries, event: MainEvent, params: EarParams) -> Result<EarTrace> {
    ear_trace_with_quiet(series, event, params, QUIET_HOURS)
}

pub fn ear_trace_with_quiet(
    series: &RainSeries,
    event: MainEvent,
    params: EarParams,
    quiet_hours: usize,
) -> Result<EarTrace> {
    if event.start_idx > event.end_idx || event.end_idx >= series.len() {
        return Err(Error::invalid(format!(
            "event [{}, {}] outside series of {} hours",
            event.start_idx,
            event.end_idx,
            series.len()
        )));
    }
    let dailies = daily_sums(
        series.values(),
        series.first_hour_of_day(),
        event.start_idx as i64,
        ANTECEDENT_DAYS,
        params.mode,
    );
    let api = antecedent_index(&dailies, params.alpha);
    let mut acc = 0.0;
    let ear = series.values()[event.start_idx..=event.end_idx]
        .iter()
        .map(|v| {
            acc += v;
            acc + api
        })
        .collect();
    Ok(EarTrace {
        event,
        antecedent_index: api,
        ear,
        alpha: params.alpha,
        daily_window_mode: params.mode,
        closed_idx: (event.end_idx + quiet_hours).min(series.len() - 1),
    })
}

/// Per-hour EAR over a whole series: zero outside main events.
#[derive(Debug, Clone, PartialEq)]
pub struct EarProfile {
    pub traces: Vec<EarTrace>,
    pub hourly: Vec<f64>,
}

impl EarProfile {
    pub fn compute(series: &RainSeries, events: EventParams, params: EarParams) -> Result<Self> {
        let mut hourly = vec![0.0; series.len()];
        let traces = segment_events(series, events)
            .into_iter()
            .map(|ev| ear_trace_with_quiet(series, ev, params, events.quiet_hours))
            .collect::<Result<Vec<_>>>()?;
        for tr in &traces {
            hourly[tr.event.start_idx..=tr.event.end_idx].copy_from_slice(&tr.ear);
        }
        Ok(Self { traces, hourly })
    }
}

#[cfg(test)]
mod tests {
    use chrono::TimeZone;

    use super::*;

    fn series(values: Vec<f64>) -> RainSeries {
        RainSeries::new(
            "S",
            Utc.with_ymd_and_hms(2020, 6, 1, 0, 0, 0).unwrap(),
            values,
        )
        .unwrap()
    }

    fn ev(a: usize, b: usize) -> MainEvent {
        MainEvent {
            start_idx: a,
            end_idx: b,
        }
    }

    #[test]
    fn rejects_bad_series() {
        let t = Utc.with_ymd_and_hms(2020, 6, 1, 0, 0, 0).unwrap();
        assert!(RainSeries::new("S", t, vec![]).is_err());
        assert!(RainSeries::new("S", t, vec![1.0, -0.5]).is_err());
        assert!(RainSeries::new("S", t, vec![f64::NAN]).is_err());
        assert!(RainSeries::new("S", t + Duration::minutes(30), vec![1.0]).is_err());
    }

    #[test]
    fn dry_series_has_no_events() {
        assert!(segment_events(&series(vec![0.0; 50]), EventParams::default()).is_empty());
        // exactly 4 mm does not exceed the threshold
        assert!(segment_events(&series(vec![4.0; 10]), EventParams::default()).is_empty());
    }

    #[test]
    fn six_quiet_hours_split_events() {
        let s = series(vec![5., 5., 0., 0., 0., 0., 0., 0., 5.]);
        assert_eq!(
            segment_events(&s, EventParams::default()),
            vec![ev(0, 1), ev(8, 8)]
        );
    }

    #[test]
    fn short_dip_does_not_split() {
        let mut v = vec![5., 3., 3., 3., 5.];
        v.extend([0.0; 6]);
        assert_eq!(
            segment_events(&series(v), EventParams::default()),
            vec![ev(0, 4)]
        );
    }

    #[test]
    fn five_quiet_hours_do_not_split() {
        let s = series(vec![5., 0., 0., 0., 0., 0., 5.]);
        assert_eq!(segment_events(&s, EventParams::default()), vec![ev(0, 6)]);
    }

    #[test]
    fn daily_totals_padding_and_rolling() {
        let s = series(vec![0.0; 300]);
        assert_eq!(
            daily_totals(&s, 200, 7, DailyWindowMode::CalendarDay).unwrap(),
            vec![0.0; 7]
        );
        let ones = series(vec![1.0; 400]);
        assert_eq!(
            daily_totals(&ones, 399, 7, DailyWindowMode::Rolling24h).unwrap(),
            vec![24.0; 7]
        );
        assert_eq!(
            daily_totals(&ones, 0, 7, DailyWindowMode::Rolling24h).unwrap(),
            vec![0.0; 7]
        );
        assert_eq!(
            daily_totals(&ones, 0, 7, DailyWindowMode::CalendarDay).unwrap(),
            vec![0.0; 7]
        );
        assert!(daily_totals(&ones, 400, 7, DailyWindowMode::Rolling24h).is_err());
    }

    #[test]
    fn calendar_days_align_to_midnight() {
        // series starts at 18:00, so hours 6..30 form the first full day
        let start = Utc.with_ymd_and_hms(2020, 6, 1, 18, 0, 0).unwrap();
        let mut v = vec![0.0; 60];
        v[5] = 100.0; // 23:00 on the partial first day
        v[6] = 1.0; // 00:00 of day two
        v[29] = 2.0; // 23:00 of day two
        v[30] = 50.0; // 00:00 of day three, same day as the anchor
        let s = RainSeries::new("S", start, v).unwrap();
        let d = daily_totals(&s, 40, 3, DailyWindowMode::CalendarDay).unwrap();
        assert_eq!(d, vec![3.0, 100.0, 0.0]);
        let r = daily_totals(&s, 40, 2, DailyWindowMode::Rolling24h).unwrap();
        assert_eq!(r, vec![52.0, 101.0]);
    }

    #[test]
    fn antecedent_index_examples() {
        assert_eq!(antecedent_index(&[0.0; 7], 0.7), 0.0);
        let mut d = [0.0; 7];
        d[0] = 10.0;
        assert!((antecedent_index(&d, 0.7) - 7.0).abs() < 1e-12);
        let geometric: f64 = 10.0 * 0.7 * (1.0 - 0.7f64.powi(7)) / (1.0 - 0.7);
        assert!((antecedent_index(&[10.0; 7], 0.7) - geometric).abs() < 1e-12);
        assert!((geometric - 21.4117).abs() < 1e-3);
    }

    #[test]
    fn ear_running_sum_without_antecedent() {
        let s = series(vec![0., 5., 7., 0.]);
        let tr = ear_trace(&s, ev(1, 2), EarParams::default()).unwrap();
        assert_eq!(tr.ear, vec![5.0, 12.0]);
        assert_eq!(tr.antecedent_index, 0.0);
    }

    #[test]
    fn ear_with_previous_day_rain() {
        // 10 mm on the previous calendar day, then a 20 mm hour
        let mut v = vec![0.0; 48];
        v[30] = 10.0;
        v.push(20.0);
        let s = series(v);
        let tr = ear_trace(&s, ev(48, 48), EarParams::default()).unwrap();
        assert!((tr.ear[0] - 27.0).abs() < 1e-12);
    }

    #[test]
    fn ear_out_of_range_is_input_error() {
        let s = series(vec![5.0; 3]);
        assert!(ear_trace(&s, ev(1, 3), EarParams::default()).is_err());
        assert!(ear_trace(&s, ev(2, 1), EarParams::default()).is_err());
    }

    #[test]
    fn profile_is_zero_outside_events() {
        let s = series(vec![0., 5., 6., 0., 0., 0., 0., 0., 0., 0., 9.]);
        let p = EarProfile::compute(&s, EventParams::default(), EarParams::default()).unwrap();
        assert_eq!(p.traces.len(), 2);
        assert_eq!(p.hourly, vec![0., 5., 11., 0., 0., 0., 0., 0., 0., 0., 9.]);
        assert_eq!(p.traces[0].closed_idx, 8);
        assert_eq!(p.traces[1].closed_idx, 10);
    }
}
