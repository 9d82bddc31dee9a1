//! Seeded synthetic rain gauges with a planted debris-flow trigger.
//!
//! Storms arrive as a Poisson process. Each storm has a gamma-distributed
//! mean intensity and an AR(1) log-intensity wobble, and hourly totals are
//! rounded to the gauge resolution. A latent soil state decays by a constant
//! factor per day over the last week; debris flows are drawn hour by hour from
//! a logistic hazard of the soil state and the current hour's rain.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, TimeZone, Utc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::baselines::{TableKind, ThresholdTable};
use crate::error::{Error, Result};
use crate::io::DebrisEvent;
use crate::models::tree_rng;
use crate::rainfall::RainSeries;

pub const SOIL_MEMORY_HOURS: usize = 168;
pub const GAUGE_RESOLUTION_MM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub stations: usize,
    pub weeks: usize,
    /// Storms per week.
    pub storm_rate: f64,
    /// Mean storm length in hours.
    pub storm_hours: f64,
    /// Gamma shape and scale (mm/h) of a storm's mean intensity.
    pub intensity_shape: f64,
    pub intensity_scale: f64,
    /// Lag-one autocorrelation and spread of hourly log-intensity within a storm.
    pub intensity_ar: f64,
    pub intensity_sigma: f64,
    /// Soil-memory decay per day.
    pub soil_decay: f64,
    /// Hazard steepness (per mm); infinite gives a hard threshold.
    pub beta: f64,
    /// Soil-state trigger level (mm).
    pub theta: f64,
    /// Weight of the current hour's rain in the hazard (per mm).
    pub gamma: f64,
    /// Log-normal spread of the per-station trigger level.
    pub theta_spread: f64,
    /// Log-normal noise of the emitted official thresholds around the trigger.
    pub threshold_noise: f64,
    /// Hours after a debris flow during which no other flow is drawn.
    pub refractory_hours: usize,
    pub start_year: i32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            stations: 48,
            weeks: 24,
            storm_rate: 1.0,
            storm_hours: 16.0,
            intensity_shape: 1.6,
            intensity_scale: 5.0,
            intensity_ar: 0.7,
            intensity_sigma: 0.6,
            soil_decay: 0.7,
            beta: 0.05,
            theta: 350.0,
            gamma: 0.1,
            theta_spread: 0.2,
            threshold_noise: 0.15,
            refractory_hours: 72,
            start_year: 2020,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0) || v.is_nan() {
                bad.push(format!("{name} must be positive (got {v})"));
            }
        };
        positive("stations", self.stations as f64);
        positive("weeks", self.weeks as f64);
        positive("storm_rate", self.storm_rate);
        positive("storm_hours", self.storm_hours);
        positive("intensity_shape", self.intensity_shape);
        positive("intensity_scale", self.intensity_scale);
        positive("beta", self.beta);
        positive("theta", self.theta);
        for (name, v) in [
            ("storm_rate", self.storm_rate),
            ("storm_hours", self.storm_hours),
            ("intensity_shape", self.intensity_shape),
            ("intensity_scale", self.intensity_scale),
            ("theta", self.theta),
        ] {
            if !v.is_finite() {
                bad.push(format!("{name} must be finite"));
            }
        }
        if !(0.0..1.0).contains(&self.intensity_ar) {
            bad.push(format!(
                "intensity_ar must lie in [0, 1) (got {})",
                self.intensity_ar
            ));
        }
        if !(self.soil_decay > 0.0 && self.soil_decay < 1.0) {
            bad.push(format!(
                "soil_decay must lie in (0, 1) (got {})",
                self.soil_decay
            ));
        }
        for (name, v) in [
            ("intensity_sigma", self.intensity_sigma),
            ("gamma", self.gamma),
            ("theta_spread", self.theta_spread),
            ("threshold_noise", self.threshold_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                bad.push(format!("{name} must be finite and non-negative (got {v})"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "invalid synth config: {}",
                bad.join("; ")
            )))
        }
    }

    fn start(&self) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(self.start_year, 5, 1, 0, 0, 0)
            .unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Storm {
    pub start: usize,
    pub hours: usize,
    pub mean_intensity: f64,
}

/// Storms starting within `hours`, in arrival order.
pub fn storm_schedule(cfg: &SynthConfig, hours: usize, rng: &mut ChaCha8Rng) -> Vec<Storm> {
    let gap = Exp::new(cfg.storm_rate / 168.0).expect("validated rate");
    let length = Exp::new(1.0 / cfg.storm_hours).expect("validated length");
    let intensity = Gamma::new(cfg.intensity_shape, cfg.intensity_scale).expect("validated gamma");
    let mut storms = Vec::new();
    let mut t = gap.sample(rng);
    while t < hours as f64 {
        storms.push(Storm {
            start: t as usize,
            hours: 1 + length.sample(rng).floor() as usize,
            mean_intensity: intensity.sample(rng),
        });
        t += gap.sample(rng);
    }
    storms
}

fn quantize(v: f64) -> f64 {
    (v / GAUGE_RESOLUTION_MM).round() * GAUGE_RESOLUTION_MM
}

/// Hourly rainfall from a storm schedule (overlapping storms add up).
pub fn render_rain(
    cfg: &SynthConfig,
    storms: &[Storm],
    hours: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut rain = vec![0.0; hours];
    let s = cfg.intensity_sigma;
    let innov = (1.0 - cfg.intensity_ar * cfg.intensity_ar).sqrt();
    for storm in storms {
        let mut l: f64 = rng.sample(StandardNormal);
        for h in 0..storm.hours {
            if h > 0 {
                let e: f64 = rng.sample(StandardNormal);
                l = cfg.intensity_ar * l + innov * e;
            }
            let t = storm.start + h;
            if t < hours {
                rain[t] += storm.mean_intensity * (s * l - 0.5 * s * s).exp();
            }
        }
    }
    rain.into_iter().map(quantize).collect()
}

/// `S(t) = sum_{i=1..168} decay^ceil(i/24) * rain(t - i)`.
pub fn soil_state(rain: &[f64], decay: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=SOIL_MEMORY_HOURS)
        .map(|i| decay.powi(i.div_ceil(24) as i32))
        .collect();
    (0..rain.len())
        .map(|t| {
            (1..=SOIL_MEMORY_HOURS.min(t))
                .map(|i| w[i - 1] * rain[t - i])
                .sum()
        })
        .collect()
}

/// Hourly debris-flow hazard `sigmoid(beta (S - theta) + gamma rain)`.
pub fn hazard(rain: &[f64], cfg: &SynthConfig, theta: f64) -> Vec<f64> {
    soil_state(rain, cfg.soil_decay)
        .into_iter()
        .zip(rain)
        .map(|(s, &r)| {
            if cfg.beta.is_infinite() {
                let z = s - theta;
                if z > 0.0 {
                    1.0
                } else if z < 0.0 || cfg.gamma * r <= 0.0 {
                    0.0
                } else {
                    crate::models::logistic::sigmoid(cfg.gamma * r)
                }
            } else {
                crate::models::logistic::sigmoid(cfg.beta * (s - theta) + cfg.gamma * r)
            }
        })
        .collect()
}

/// Bernoulli draws from `hazard` with a refractory period after each flow.
pub fn sample_flows(hazard: &[f64], refractory: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut flows = Vec::new();
    let mut blocked_until = 0;
    for (t, &p) in hazard.iter().enumerate() {
        let u: f64 = rng.random();
        if t >= blocked_until && u < p {
            flows.push(t);
            blocked_until = t + 1 + refractory;
        }
    }
    flows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationTruth {
    pub station_id: String,
    pub theta: f64,
    pub storms: usize,
    pub flows: usize,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub series: Vec<RainSeries>,
    pub events: Vec<DebrisEvent>,
    pub thresholds: ThresholdTable,
    pub truth: Vec<StationTruth>,
}

pub fn station_id(i: usize) -> String {
    format!("ST{:03}", i + 1)
}

fn official_threshold(theta: f64, decay: f64, noise: f64) -> f64 {
    ((theta / decay * noise / 50.0).round() * 50.0).clamp(200.0, 600.0)
}

/// Generates the whole corpus. Station `i` draws from ChaCha8 stream `i`, so
/// stations are independent of each other and of generation order.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let hours = cfg.weeks * 168;
    let start = cfg.start();
    let mut series = Vec::with_capacity(cfg.stations);
    let mut events = Vec::new();
    let mut table = BTreeMap::new();
    let mut truth = Vec::with_capacity(cfg.stations);
    for i in 0..cfg.stations {
        let mut rng = tree_rng(cfg.seed, i as u64);
        let id = station_id(i);
        let z: f64 = rng.sample(StandardNormal);
        let theta = cfg.theta * (cfg.theta_spread * z).exp();
        let z: f64 = rng.sample(StandardNormal);
        let thr = official_threshold(theta, cfg.soil_decay, (cfg.threshold_noise * z).exp());
        let storms = storm_schedule(cfg, hours, &mut rng);
        let rain = render_rain(cfg, &storms, hours, &mut rng);
        let flows = sample_flows(&hazard(&rain, cfg, theta), cfg.refractory_hours, &mut rng);
        events.extend(flows.iter().map(|&t| DebrisEvent {
            station_id: id.clone(),
            timestamp: start + chrono::Duration::hours(t as i64),
        }));
        table.insert((id.clone(), start.year()), thr);
        truth.push(StationTruth {
            station_id: id.clone(),
            theta,
            storms: storms.len(),
            flows: flows.len(),
        });
        series.push(RainSeries::new(id, start, rain)?);
    }
    if events.is_empty() {
        return Err(Error::invalid(
            "synthetic corpus has no debris flows; lower theta, raise beta, gamma or storm_rate, or add stations/weeks",
        ));
    }
    Ok(Corpus {
        series,
        events,
        thresholds: ThresholdTable::new(TableKind::Official, table)?,
        truth,
    })
}
