use std::path::{Path, PathBuf};

use debris_ews::baselines::AlertPolicy;
use debris_ews::dataset::{FeatureSpec, LabelingConfig, WindowConfig};
use debris_ews::explain::ImportanceMethod;
use debris_ews::metrics::Statistic;
use debris_ews::models::grid::{
    DEFAULT_DEPTHS, DEFAULT_L2_COEFFICIENTS, DEFAULT_LEARNING_RATES, DEFAULT_MIN_SAMPLES,
    DEFAULT_TREE_COUNTS,
};
use debris_ews::models::{ForestParams, GbtParams, GridSpec, LogisticParams, ModelSpec, Penalty};
use debris_ews::synth::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a run needs. Every section is optional in the file; missing
/// values take the documented defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Mandatory, either here or via `--seed`.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub inputs: Inputs,
    pub synth: SynthConfig,
    pub windows: WindowConfig,
    pub features: FeatureSpec,
    pub labeling: LabelingConfig,
    pub split: SplitConfig,
    pub model: ModelSpec,
    pub grid: GridConfig,
    pub baselines: BaselineConfig,
    pub eval: EvalConfig,
    pub bootstrap: BootstrapSection,
    pub operating_points: OperatingPointConfig,
    pub explain: ExplainConfig,
    /// Keys in the file that match no setting; reported by `validate`.
    #[serde(skip)]
    pub unknown_fields: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Inputs {
    /// Defaults to `<out>/rainfall.csv` (and likewise for the others).
    pub rainfall: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub thresholds: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub impute_missing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub test_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.15,
        }
    }
}

/// Hyperparameter grid; `max_depth = 0` stands for unbounded depth.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub kind: ModelKind,
    pub folds: usize,
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub l2: Vec<f64>,
    pub include_unpenalized: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Rf,
            folds: 10,
            n_trees: DEFAULT_TREE_COUNTS.to_vec(),
            max_depth: DEFAULT_DEPTHS.iter().map(|d| d.unwrap_or(0)).collect(),
            min_samples_leaf: DEFAULT_MIN_SAMPLES.to_vec(),
            learning_rate: DEFAULT_LEARNING_RATES.to_vec(),
            l2: DEFAULT_L2_COEFFICIENTS.to_vec(),
            include_unpenalized: true,
        }
    }
}

impl GridConfig {
    pub fn spec(&self, base: &ModelSpec) -> GridSpec {
        let depths: Vec<Option<usize>> = self
            .max_depth
            .iter()
            .map(|&d| (d > 0).then_some(d))
            .collect();
        match self.kind {
            ModelKind::Rf => {
                let b = match base {
                    ModelSpec::RandomForest(p) => *p,
                    _ => ForestParams::default(),
                };
                GridSpec::forest(&self.n_trees, &depths, &self.min_samples_leaf, b)
            }
            ModelKind::Gbt => {
                let b = match base {
                    ModelSpec::GradientBoosting(p) => *p,
                    _ => GbtParams::default(),
                };
                let mc: Vec<f64> = self.min_samples_leaf.iter().map(|&v| v as f64).collect();
                GridSpec::gbt(&self.n_trees, &depths, &mc, &self.learning_rate, b)
            }
            ModelKind::Lr => {
                let b = match base {
                    ModelSpec::Logistic(p) => *p,
                    _ => LogisticParams::default(),
                };
                let mut pens: Vec<Penalty> = Vec::new();
                if self.include_unpenalized {
                    pens.push(Penalty::None);
                }
                pens.extend(self.l2.iter().map(|&c| Penalty::L2 { c }));
                GridSpec::logistic(&pens, b)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rf,
    Lr,
    Gbt,
}

impl ModelKind {
    pub fn default_spec(self) -> ModelSpec {
        match self {
            ModelKind::Rf => ModelSpec::RandomForest(ForestParams::default()),
            ModelKind::Lr => ModelSpec::Logistic(LogisticParams::default()),
            ModelKind::Gbt => ModelSpec::GradientBoosting(GbtParams::default()),
        }
    }

    pub fn of(spec: &ModelSpec) -> Self {
        match spec {
            ModelSpec::RandomForest(_) => ModelKind::Rf,
            ModelSpec::Logistic(_) => ModelKind::Lr,
            ModelSpec::GradientBoosting(_) => ModelKind::Gbt,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub policy: AlertPolicy,
    pub scale_step: f64,
    pub hm_steps: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            policy: AlertPolicy::default(),
            scale_step: 0.001,
            hm_steps: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// `P_threshold` used for the point metrics.
    pub alert_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            alert_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapSection {
    pub statistic: Statistic,
    pub block_hours: usize,
    pub replicates: usize,
    pub level: f64,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self {
            statistic: Statistic::Auprc,
            block_hours: 6,
            replicates: 10_000,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatingPointConfig {
    pub recall_targets: Vec<f64>,
    pub precision_targets: Vec<f64>,
    /// Also report the targets reached by the official ETM thresholds.
    pub include_current: bool,
}

impl Default for OperatingPointConfig {
    fn default() -> Self {
        let tenths: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        Self {
            recall_targets: tenths.clone(),
            precision_targets: tenths,
            include_current: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    /// Test rows to explain (evenly spaced over the test set); 0 means all.
    pub rows: usize,
    pub background_rows: usize,
    pub importance: ImportanceMethod,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            rows: 500,
            background_rows: 128,
            importance: ImportanceMethod::MeanAbsShap,
        }
    }
}

impl RunConfig {
    /// Reads a TOML config, rejecting unknown keys (all of them are listed).
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        let mut unknown = Vec::new();
        let mut cfg: RunConfig = serde_ignored::deserialize(de, |p| unknown.push(p.to_string()))
            .map_err(|e| CliError::Input(format!("invalid config: {e}")))?;
        cfg.unknown_fields = unknown;
        Ok(cfg)
    }

    /// Every schema problem at once.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut bad: Vec<String> = Vec::new();
        for (field, r) in [
            ("synth", self.synth.validate()),
            ("features", self.features.validate()),
            ("labeling", self.labeling.validate()),
            ("model", self.model.validate()),
        ] {
            if let Err(e) = r {
                bad.push(format!("{field}: {e}"));
            }
        }
        if !self.unknown_fields.is_empty() {
            bad.push(format!(
                "unknown fields: {}",
                self.unknown_fields.join(", ")
            ));
        }
        if self.seed.is_none() {
            bad.push("seed: required (set `seed` in the config or pass --seed)".into());
        }
        if self.threads == Some(0) {
            bad.push("threads: must be at least 1".into());
        }
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            bad.push(format!(
                "split.test_fraction: {} must lie in (0, 1)",
                self.split.test_fraction
            ));
        }
        if self.grid.folds < 2 {
            bad.push("grid.folds: need at least 2".into());
        }
        let cells = self.grid.spec(&self.model).cells;
        if cells.is_empty() {
            bad.push("grid: no cells (a value list is empty)".into());
        }
        for (i, c) in cells.iter().enumerate() {
            if let Err(e) = c.validate() {
                bad.push(format!("grid cell {i}: {e}"));
                break;
            }
        }
        if !(self.baselines.scale_step > 0.0) {
            bad.push("baselines.scale_step: must be positive".into());
        }
        if self.baselines.hm_steps == 0 {
            bad.push("baselines.hm_steps: must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.eval.alert_threshold) {
            bad.push("eval.alert_threshold: must lie in [0, 1]".into());
        }
        if self.bootstrap.block_hours == 0 || self.bootstrap.replicates == 0 {
            bad.push("bootstrap: block_hours and replicates must be positive".into());
        }
        if !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) {
            bad.push("bootstrap.level: must lie in (0, 1)".into());
        }
        for (name, t) in [
            (
                "operating_points.recall_targets",
                &self.operating_points.recall_targets,
            ),
            (
                "operating_points.precision_targets",
                &self.operating_points.precision_targets,
            ),
        ] {
            if t.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
                bad.push(format!("{name}: targets must lie in (0, 1]"));
            }
        }
        if self.explain.background_rows == 0 {
            bad.push("explain.background_rows: must be positive".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Input(format!(
                "invalid config:\n  {}",
                bad.join("\n  ")
            )))
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn input(&self, p: &Option<PathBuf>, default: &str) -> PathBuf {
        p.clone().unwrap_or_else(|| self.out_dir().join(default))
    }

    pub fn rainfall_path(&self) -> PathBuf {
        self.input(&self.inputs.rainfall, "rainfall.csv")
    }

    pub fn events_path(&self) -> PathBuf {
        self.input(&self.inputs.events, "events.csv")
    }

    pub fn thresholds_path(&self) -> PathBuf {
        self.input(&self.inputs.thresholds, "thresholds.csv")
    }

    pub fn model_path(&self) -> PathBuf {
        self.input(&self.inputs.model, "model.json")
    }

    /// Replaces the model with the best cell recorded by `cv` for the
    /// configured number of hourly lags.
    pub fn apply_cv_best(&mut self, path: &Path) -> Result<(), CliError> {
        #[derive(Deserialize)]
        struct Entry {
            hours: usize,
            spec: ModelSpec,
        }
        #[derive(Deserialize)]
        struct Doc {
            best: Vec<Entry>,
        }
        let bad = |m: String| CliError::Input(format!("{}: {m}", path.display()));
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read: {e}")))?;
        let doc: Doc = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let h = self.features.hourly_hours;
        let entry = doc
            .best
            .into_iter()
            .find(|e| e.hours == h)
            .ok_or_else(|| bad(format!("no cross-validation result for {h} hourly lags")))?;
        self.model = entry.spec;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::Internal(format!("cannot serialize config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_needs_a_seed() {
        let c = RunConfig::parse("").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("seed = 1").unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_all_listed() {
        let c = RunConfig::parse("seed = 1\nbogus = 2\n[features]\nhourly = 3\n").unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(
            msg.contains("bogus") && msg.contains("features.hourly"),
            "{msg}"
        );
    }

    #[test]
    fn every_violation_is_reported() {
        let c = RunConfig::parse(
            "seed = 1\n[split]\ntest_fraction = 0.0\n[features]\nhourly_hours = 500\n",
        )
        .unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(
            msg.contains("split.test_fraction") && msg.contains("features"),
            "{msg}"
        );
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut c =
            RunConfig::parse("seed = 3\n[model]\nkind = \"gradient_boosting\"\nn_rounds = 7\n")
                .unwrap();
        c.out_dir = Some("x".into());
        let text = c.to_toml().unwrap();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back.model, c.model);
        assert_eq!(back.to_toml().unwrap(), text);
    }
}
