//! Command-line front end: synthetic data, dataset building, training,
//! evaluation and explanation, each as a subcommand driven by one TOML config.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ModelKind, RunConfig};

/// Input errors exit with 1, everything else with 2.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Internal(String),
}

impl std::error::Error for CliError {}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<debris_ews::Error> for CliError {
    fn from(e: debris_ews::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "debris-ews",
    version,
    about = "Debris-flow early warning from hourly rainfall"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Multiplier on the weight of positive training hours.
    #[arg(long)]
    training_weight: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct ScoreArgs {
    /// Trained model (default `<out>/model.json`, or `model_<tag>.json`).
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Suffix for output file names.
    #[arg(long)]
    tag: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic rainfall and debris-flow corpus.
    Synth(Common),
    /// Segment rainfall into main events.
    Segment(Common),
    /// EAR trajectories of every main event.
    Ear(Common),
    /// Build windows, the stratified split and feature matrices.
    BuildDataset {
        #[command(flatten)]
        common: Common,
        /// Hourly lags per example.
        #[arg(long)]
        hours: Option<usize>,
    },
    /// Train a model on the training windows.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Hourly lags per example.
        #[arg(long)]
        hours: Option<usize>,
        /// Take the model from the best cell of a `cv` run (`cv_best*.json`).
        #[arg(long)]
        best_of: Option<PathBuf>,
        /// Writes `model_<tag>.json`.
        #[arg(long)]
        tag: Option<String>,
    },
    /// Window-grouped cross-validated grid search on the training windows.
    Cv {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated list of hourly lag counts.
        #[arg(long, value_delimiter = ',')]
        hours: Vec<usize>,
        /// Writes `cv_results_<tag>.csv` and `cv_best_<tag>.json`.
        #[arg(long)]
        tag: Option<String>,
    },
    /// Score the test windows with a trained model.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        score: ScoreArgs,
    },
    /// Threshold sweeps of the HM and ETM baselines on the test windows.
    SweepBaselines(Common),
    /// Block-bootstrap confidence intervals for the model and both baselines.
    BootstrapCi {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        score: ScoreArgs,
    },
    /// Model thresholds meeting recall or precision targets.
    OperatingPoints {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        score: ScoreArgs,
    },
    /// Debris flows captured per probability threshold.
    EventCapture {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        score: ScoreArgs,
    },
    /// SHAP attributions and feature importance of a trained forest.
    Explain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        score: ScoreArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Segment(_) => "segment",
            Command::Ear(_) => "ear",
            Command::BuildDataset { .. } => "build-dataset",
            Command::Train { .. } => "train",
            Command::Cv { .. } => "cv",
            Command::Eval { .. } => "eval",
            Command::SweepBaselines(_) => "sweep-baselines",
            Command::BootstrapCi { .. } => "bootstrap-ci",
            Command::OperatingPoints { .. } => "operating-points",
            Command::EventCapture { .. } => "event-capture",
            Command::Explain { .. } => "explain",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Synth(c)
            | Command::Segment(c)
            | Command::Ear(c)
            | Command::SweepBaselines(c) => c,
            Command::BuildDataset { common, .. }
            | Command::Train { common, .. }
            | Command::Cv { common, .. }
            | Command::Eval { common, .. }
            | Command::BootstrapCi { common, .. }
            | Command::OperatingPoints { common, .. }
            | Command::EventCapture { common, .. }
            | Command::Explain { common, .. } => common,
        }
    }
}

/// Loads the config and folds in command-line overrides.
fn resolve(cmd: &Command) -> Result<RunConfig, CliError> {
    let common = cmd.common();
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &common.out {
        cfg.out_dir = Some(o.clone());
    }
    cfg.out_dir = Some(cfg.out_dir());
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    if let Some(s) = cfg.seed {
        cfg.synth.seed = s;
    }
    match cmd {
        Command::BuildDataset { hours: Some(h), .. } | Command::Train { hours: Some(h), .. } => {
            cfg.features.hourly_hours = *h;
        }
        _ => {}
    }
    if let Command::Train { model, .. } | Command::Cv { model, .. } = cmd {
        if let Some(kind) = model.model {
            if ModelKind::of(&cfg.model) != kind {
                cfg.model = kind
                    .default_spec()
                    .with_training_weight(cfg.model.training_weight());
            }
            cfg.grid.kind = kind;
        }
        if let Command::Train {
            best_of: Some(p), ..
        } = cmd
        {
            cfg.apply_cv_best(p)?;
        }
        if let Some(tw) = model.training_weight {
            cfg.model = cfg.model.with_training_weight(tw);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cmd: Command) -> Result<(), CliError> {
    let cfg = resolve(&cmd)?;
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out).map_err(|e| {
        CliError::Input(format!(
            "cannot create output directory {}: {e}",
            out.display()
        ))
    })?;
    std::fs::write(
        out.join(format!("{}.config.toml", cmd.name())),
        cfg.to_toml()?,
    )?;
    let ctx = commands::Context::new(cfg);
    match cmd {
        Command::Synth(_) => ctx.synth(),
        Command::Segment(_) => ctx.segment(),
        Command::Ear(_) => ctx.ear(),
        Command::BuildDataset { .. } => ctx.build_dataset(),
        Command::Train { tag, .. } => ctx.train(tag.as_deref()),
        Command::Cv { hours, tag, .. } => ctx.cv(&hours, tag.as_deref()),
        Command::Eval { score, .. } => ctx.eval(&score.into()),
        Command::SweepBaselines(_) => ctx.sweep_baselines(),
        Command::BootstrapCi { score, .. } => ctx.bootstrap_ci(&score.into()),
        Command::OperatingPoints { score, .. } => ctx.operating_points(&score.into()),
        Command::EventCapture { score, .. } => ctx.event_capture(&score.into()),
        Command::Explain { score, .. } => ctx.explain(&score.into()),
    }
}

impl From<ScoreArgs> for commands::ScoreTarget {
    fn from(a: ScoreArgs) -> Self {
        commands::ScoreTarget {
            model_file: a.model_file,
            tag: a.tag,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DEBRIS_EWS_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(2)
        }
    }
}
