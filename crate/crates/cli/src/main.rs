//! `finn`: generate data, train, predict, evaluate and extract retardation
//! curves from the command line.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use finn_core::train::LossMask;

#[derive(Debug, Parser)]
#[command(name = "finn", version, about = "Finite volume neural networks for diffusion-sorption transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write it as a dataset directory.
    Generate(GenerateArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Roll a trained model out under a scenario.
    Predict(PredictArgs),
    /// Score a checkpoint on training, extrapolation and unseen windows.
    Evaluate(EvaluateArgs),
    /// Write the learned retardation factor R(c) as CSV.
    ExtractRetardation(ExtractArgs),
    /// Train and evaluate one model per seed and aggregate the errors.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Preset name or scenario file.
    #[arg(long)]
    pub preset: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Standard deviation of Gaussian noise added to both fields.
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the source concentration of the preset.
    #[arg(long, value_parser = positive)]
    pub c_s: Option<f64>,
    /// Also draw the breakthrough curve.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Everything learned, D_e recovered from the ct equation.
    Synthetic,
    /// D_e known from the dataset's soil parameters.
    Experimental,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    Adaptive,
    Rk4,
    Euler,
}

/// Options shared by `train` and `experiment`.
#[derive(Debug, Args)]
pub struct TrainOptions {
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    pub lr: f64,
    #[arg(long, default_value = "full", value_parser = parse_mask)]
    pub mask: LossMask,
    #[arg(long, value_enum, default_value_t = Mode::Synthetic)]
    pub mode: Mode,
    /// Noise added to the training target.
    #[arg(long, default_value_t = 1e-5, value_parser = non_negative)]
    pub noise: f64,
    /// Rows 0..N of the dataset form the training window.
    #[arg(long, default_value_t = 500, value_parser = at_least_two)]
    pub window: usize,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Adaptive)]
    pub integrator: IntegratorArg,
    /// Substeps per output interval for the fixed-step integrators.
    #[arg(long, default_value_t = 1, value_parser = at_least_one)]
    pub substeps: usize,
    /// Global gradient-norm bound.
    #[arg(long, value_parser = positive)]
    pub clip: Option<f64>,
    /// Detach the rollout every N steps.
    #[arg(long, value_parser = at_least_one)]
    pub truncate: Option<usize>,
    /// Upper clamp of the diffusivity network input (default 2 c_s).
    #[arg(long, value_parser = positive)]
    pub c_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub opts: TrainOptions,
    /// Also draw the loss history.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Preset name or scenario file.
    #[arg(long)]
    pub preset: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Last output time in days; rows stay at the preset's spacing.
    #[arg(long, value_parser = positive)]
    pub t_end: Option<f64>,
    #[arg(long, value_parser = positive)]
    pub c_s: Option<f64>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// First row of the extrapolation window.
    #[arg(long, default_value_t = 500, value_parser = at_least_one)]
    pub split: usize,
    /// Directory for report.csv and the manifest.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// CSV file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    pub c_min: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub c_max: f64,
    #[arg(long, default_value_t = 100, value_parser = at_least_two)]
    pub points: usize,
    /// Porosity, needed when the checkpoint does not know D_e.
    #[arg(long, value_parser = positive)]
    pub porosity: Option<f64>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// `synthetic` for the train/test pair, or any preset name or file.
    #[arg(long, default_value = "synthetic")]
    pub preset: String,
    /// Scenario for the unseen-data score (defaults to the training one).
    #[arg(long)]
    pub test_preset: Option<String>,
    /// Number of seeds.
    #[arg(long, default_value_t = 10, value_parser = at_least_one)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub first_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (defaults to the available cores).
    #[arg(long, value_parser = at_least_one)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub opts: TrainOptions,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be a positive finite number, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be a non-negative finite number, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn at_least(s: &str, min: usize) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= min => Ok(v),
        Ok(v) => Err(format!("must be at least {min}, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn at_least_one(s: &str) -> Result<usize, String> {
    at_least(s, 1)
}

fn at_least_two(s: &str) -> Result<usize, String> {
    at_least(s, 2)
}

fn parse_mask(s: &str) -> Result<LossMask, String> {
    s.parse().map_err(|e: finn_core::Error| e.to_string())
}

/// Verbosity selected by `FINN_LOG`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Verbosity {
    Quiet,
    Info,
    Debug,
}

impl Verbosity {
    fn from_env() -> Result<Self, String> {
        match std::env::var("FINN_LOG") {
            Err(_) => Ok(Verbosity::Info),
            Ok(v) => match v.as_str() {
                "quiet" => Ok(Verbosity::Quiet),
                "info" | "" => Ok(Verbosity::Info),
                "debug" => Ok(Verbosity::Debug),
                other => Err(format!("FINN_LOG must be quiet, info or debug, got `{other}`")),
            },
        }
    }

    pub fn info(self) -> bool {
        self >= Verbosity::Info
    }

    pub fn debug(self) -> bool {
        self >= Verbosity::Debug
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(finn_core::Error),
}

impl From<finn_core::Error> for CliError {
    fn from(e: finn_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use finn_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Core(E::UnknownPreset(_)) => 1,
            CliError::Core(e) if e.is_numerical() || matches!(e, E::Graph(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let log = match Verbosity::from_env() {
        Ok(l) => l,
        Err(m) => {
            eprintln!("finn: usage error: {m}");
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a, log),
        Command::Train(a) => commands::train(a, log),
        Command::Predict(a) => commands::predict(a, log),
        Command::Evaluate(a) => commands::evaluate(a, log),
        Command::ExtractRetardation(a) => commands::extract_retardation(a, log),
        Command::Experiment(a) => commands::experiment(a, log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("finn: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
