//! Command-line front end. Every command composes library calls from
//! `koopinv` and writes CSV or JSON files into the output directory.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use koopinv::learner::{FeatureMode, FeatureSpec};
use koopinv::Regime;

pub use config::RunConfig;

/// Failure classes with their process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable or invalid config, input file or argument (exit 2).
    #[error("{0}")]
    Input(String),
    /// Model and request disagree on the feature layout (exit 3).
    #[error("{0}")]
    Compatibility(String),
    /// A numerical step failed (exit 4).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Compatibility(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<koopinv::Error> for CliError {
    fn from(e: koopinv::Error) -> Self {
        use koopinv::Error as E;
        match e {
            E::Io(_) | E::Json(_) | E::Parse(_) | E::Domain(_) | E::Dimension(_) | E::NonFinite(_) => {
                CliError::Input(e.to_string())
            }
            E::IncompatibleSpec(_) | E::WidthMismatch { .. } => CliError::Compatibility(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "koopinv", version, about = "Learned and exact inverse operators for minimum-phase LTI systems")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides KOOPINV_SEED and the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for training pools.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory (overrides KOOPINV_OUT and the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the plant and write `u`, `y` and its derivatives.
    Simulate(SimulateArgs),
    /// Write the feature dataset for one operator variant.
    Collect(OperatorArgs),
    /// Train the hidden-width pool and keep the best model.
    Train(TrainArgs),
    /// Predict the inverse input along a desired trajectory.
    Invert(InvertArgs),
    /// Run a full sweep: table2, table3 or decay-fit.
    Reproduce(ReproduceArgs),
    /// Hidden-state estimation error against window length.
    Decay(DecayArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `excitation`, `step`, `zero`, `nominal:K` (K in 1..=10) or a CSV file with a `u` channel.
    #[arg(long, default_value = "excitation")]
    pub input: String,
    /// Simulated time in seconds (defaults depend on the input).
    #[arg(long)]
    pub duration: Option<f64>,
    /// `example` or a state-space TOML file (overrides the config).
    #[arg(long)]
    pub system: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    History,
    Narx,
    NarxStar,
}

impl From<FeatureMode> for ModeArg {
    fn from(m: FeatureMode) -> Self {
        match m {
            FeatureMode::HistoryDerivatives => ModeArg::History,
            FeatureMode::Narx => ModeArg::Narx,
            FeatureMode::NarxStar => ModeArg::NarxStar,
        }
    }
}

pub fn mode_spec(mode: ModeArg, window: f64, tap_dt: f64, order: usize) -> FeatureSpec {
    match mode {
        ModeArg::History => FeatureSpec::history_derivatives(window, tap_dt, order),
        ModeArg::Narx => FeatureSpec::narx(window, tap_dt),
        ModeArg::NarxStar => FeatureSpec::narx_star(window, tap_dt),
    }
}

pub fn parse_regime(text: &str) -> Result<Regime, String> {
    Regime::parse(text).map_err(|e| e.to_string())
}

#[derive(Clone, Debug, Args)]
pub struct OperatorArgs {
    /// History window T in seconds.
    #[arg(long, default_value_t = 3.2)]
    pub window: f64,
    /// Tap spacing in seconds.
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    /// Highest output derivative in the features.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::History)]
    pub mode: ModeArg,
    /// `noise-free` or `noisy`.
    #[arg(long, value_parser = parse_regime, default_value = "noise-free")]
    pub regime: Regime,
}

impl OperatorArgs {
    /// Feature layout; the NARX variants fix their own derivative order.
    pub fn spec(&self) -> FeatureSpec {
        mode_spec(self.mode, self.window, self.dt, self.order)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub operator: OperatorArgs,
    /// Hidden widths, comma separated (defaults to the config pool).
    #[arg(long, value_delimiter = ',')]
    pub hidden: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    /// Trained model file.
    #[arg(long, conflicts_with = "analytic")]
    pub model: Option<PathBuf>,
    /// Use the exact inverse instead of a model.
    #[arg(long)]
    pub analytic: bool,
    /// Built-in evaluation trajectory, 1..=10.
    #[arg(long, conflicts_with = "trajectory_file")]
    pub trajectory: Option<usize>,
    /// CSV file whose first channel is the desired output before filtering.
    #[arg(long)]
    pub trajectory_file: Option<PathBuf>,
    /// Requested window; must match the model.
    #[arg(long)]
    pub window: Option<f64>,
    /// Requested tap spacing; must match the model.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Requested derivative order; must match the model.
    #[arg(long)]
    pub order: Option<usize>,
    /// Requested operator mode; must match the model.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Table2,
    Table3,
    DecayFit,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub which: Which,
    /// Tap spacings, comma separated (table3 uses the first).
    #[arg(long, value_delimiter = ',')]
    pub dt: Vec<f64>,
    /// Restrict table3 to one regime.
    #[arg(long, value_parser = parse_regime)]
    pub regime: Option<Regime>,
    /// Window for table3.
    #[arg(long, default_value_t = 3.2)]
    pub window: f64,
}

#[derive(Debug, Args)]
pub struct DecayArgs {
    /// Window lengths, comma separated (defaults to the config windows).
    #[arg(long, value_delimiter = ',')]
    pub windows: Vec<f64>,
}

/// Resolves the configuration (flag over environment over file) and runs the command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cfg.apply_env(std::env::var(config::SEED_ENV).ok(), std::env::var(config::OUT_ENV).ok())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Command::Simulate(args) = &cli.command {
        if let Some(system) = &args.system {
            cfg.system = system.clone();
        }
    }
    cfg.validate()?;
    match cli.command {
        Command::Simulate(args) => commands::simulate(&cfg, &args),
        Command::Collect(args) => commands::collect(&cfg, &args),
        Command::Train(args) => commands::train(&cfg, &args),
        Command::Invert(args) => commands::invert(&cfg, &args),
        Command::Reproduce(args) => commands::reproduce(&cfg, &args),
        Command::Decay(args) => commands::decay(&cfg, &args),
    }
}
