use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ssacpd", version, about = "SSA feature extraction for change-point detection")]
pub struct Cli {
    /// Master seed; overrides any seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// JSON configuration for the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (CSV plus JSON sidecar).
    Generate(GenerateArgs),
    /// Fit stationary and non-stationary projections.
    FitSsa(FitSsaArgs),
    /// Choose the stationary dimension with the likelihood-ratio test.
    SelectOrder(SelectOrderArgs),
    /// Hold-out permutation scores per candidate dimension.
    Bnise(BniseArgs),
    /// Run a change-point detector.
    Detect(DetectArgs),
    /// Score a detector report against ground truth.
    Evaluate(EvaluateArgs),
    /// Run a cached multi-stage pipeline from --config.
    Experiment,
    /// Render a result CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args, Default)]
pub struct GenerateArgs {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub d_s: Option<usize>,
    #[arg(long)]
    pub d_n: Option<usize>,
    #[arg(long)]
    pub n_epochs: Option<usize>,
    #[arg(long)]
    pub epoch_len: Option<usize>,
    #[arg(long)]
    pub power: Option<f64>,
    #[arg(long)]
    pub n_states: Option<usize>,
    #[arg(long)]
    pub p_stay: Option<f64>,
    /// Base name of the written files.
    #[arg(long, default_value = "dataset")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct FitSsaArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long)]
    pub d_s: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Also write the estimated sources as CSV.
    #[arg(long)]
    pub extract: bool,
}

#[derive(Debug, Args)]
pub struct SelectOrderArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BniseArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Largest candidate dimension.
    #[arg(long)]
    pub up_to: usize,
    /// Epochs per half of the series.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub permutations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectorName {
    Slcd,
    Cusum,
    Kl,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub detector: DetectorName,
    /// Number of evaluation epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// SLCD cluster count.
    #[arg(long)]
    pub k: Option<usize>,
    /// CUSUM or KL window length.
    #[arg(long)]
    pub window: Option<usize>,
    /// CUSUM alarm threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// KL kernel width: `auto` or a positive number.
    #[arg(long)]
    pub sigma: Option<String>,
    /// KL switch cost.
    #[arg(long)]
    pub cost: Option<f64>,
    /// Treat --cost as an absolute value rather than a multiple of the median distance.
    #[arg(long)]
    pub cost_absolute: bool,
    /// KL exact number of change points.
    #[arg(long)]
    pub fixed_n: Option<usize>,
    /// Channel to feed a univariate detector.
    #[arg(long)]
    pub channel: Option<usize>,
    #[arg(long, default_value = "report")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub report: PathBuf,
    /// Dataset sidecar JSON with the true change points.
    #[arg(long)]
    pub truth: PathBuf,
    /// Boundaries of slack when matching flags to true changes.
    #[arg(long, default_value_t = 0)]
    pub tolerance: usize,
    #[arg(long, default_value = "roc")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output file name inside --out; defaults to the input stem with `.svg`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub title: Option<String>,
}
