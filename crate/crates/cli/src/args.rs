use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "skyfall", version, about = "UAV landing trajectory generation, prediction and benchmarking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic landing dataset.
    GenData(GenDataArgs),
    /// Fit a GMR model or train a GAN.
    Train(TrainArgs),
    /// Write predicted trajectories (observed half followed by prediction).
    Predict(PredictArgs),
    /// Write per-point ADE and per-axis error reports.
    Eval(EvalArgs),
    /// Write discriminator scores of true and generated trajectories.
    Score(ScoreArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    Vertical,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gmr,
    Gan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Standard deviation of the initial x and y positions.
    #[arg(long)]
    pub xy_sigma: Option<f64>,
    /// Standard deviation of the initial altitude.
    #[arg(long)]
    pub z_sigma: Option<f64>,
}

/// Which trajectories of a data file to use.
#[derive(Debug, Args, Serialize)]
pub struct Selection {
    /// Use every trajectory instead of the held-out split.
    #[arg(long)]
    pub all: bool,
    /// Shuffle seed of the train/eval split; defaults to the one recorded in the model.
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Held-out trajectories; defaults to the count recorded in the model.
    #[arg(long)]
    pub eval_count: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Trajectories held out for evaluation after a seeded shuffle.
    #[arg(long, default_value_t = 100)]
    pub eval_count: usize,
    /// Mixture components.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub em_iters: usize,
    #[arg(long, default_value_t = 5)]
    pub em_restarts: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub em_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub cov_reg: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr_g: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr_d: f64,
    /// Weight of the L2 term in the generator loss.
    #[arg(long = "lambda", default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub adv_weight: f64,
    #[arg(long, default_value_t = 1)]
    pub best_of_k: usize,
    #[arg(long, default_value_t = 8)]
    pub noise_dim: usize,
    #[arg(long, default_value_t = 1)]
    pub d_steps: usize,
    #[arg(long, default_value_t = 16)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden_dim: usize,
    #[arg(long, default_value_t = 64)]
    pub pool_hidden: usize,
    /// Rows per gradient slice.
    #[arg(long, default_value_t = 32)]
    pub chunk: usize,
    /// Comma-separated environment vector fed to the generator.
    #[arg(long, value_delimiter = ',')]
    pub env: Vec<f64>,
    /// Also write the per-epoch training history as JSON.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Noise seed for GAN sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub selection: Selection,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["model", "pred"]))]
pub struct EvalArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Evaluate a file written by `predict` instead of running a model.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    /// Method label used in report names with `--pred`.
    #[arg(long, default_value = "pred")]
    pub label: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub selection: Selection,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Report path; a `.json` extension selects JSON, anything else CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub selection: Selection,
}
