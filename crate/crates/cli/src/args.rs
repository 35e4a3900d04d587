use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rll_core::confidence::ConfidenceMode;
use rll_core::eval::Method;
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "rll", version, about = "Representation learning from crowdsourced labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic crowdsourced dataset as JSON lines.
    Generate(GenerateArgs),
    /// Per-example majority vote, confidences and Dawid-Skene posteriors.
    Infer(InferArgs),
    /// Cross-validate methods and print the comparison table.
    Evaluate(EvaluateArgs),
    /// Cross-validate over a grid of negative counts or worker counts.
    Sweep(SweepArgs),
    /// Train an encoder on a whole dataset and save a checkpoint.
    Train(TrainArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output JSON-lines file.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with synthetic-data settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Positive-to-negative class ratio.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Comma-separated per-worker accuracies; their count sets d.
    #[arg(long, value_delimiter = ',')]
    pub accuracies: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Dataset selection and settings shared by the commands that consume data.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// JSON-lines dataset.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON experiment file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Keep only the first D crowd-label slots of every example.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Beta prior strength for Bayesian confidences.
    #[arg(long)]
    pub prior_strength: Option<f64>,
    /// Positive-to-negative ratio for the Beta prior; estimated from
    /// majority-vote labels when absent.
    #[arg(long)]
    pub class_ratio: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Negatives per group.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub groups_per_epoch: Option<usize>,
    /// Comma-separated hidden widths; the last is the embedding size.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Softmax smoothing factor.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub init_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Per-example CSV (id, mv, mle, bayes, ds_posterior).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file for the agreement summary.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated methods; all six by default.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// JSON report file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Text file receiving the comparison table.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    K,
    D,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub sweep: Option<SweepParam>,
    /// Comma-separated grid values.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<usize>>,
    /// Method to sweep; rll-bayes by default.
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Off,
    Mle,
    Bayesian,
}

impl From<ModeArg> for ConfidenceMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Off => ConfidenceMode::Off,
            ModeArg::Mle => ConfidenceMode::Mle,
            ModeArg::Bayesian => ConfidenceMode::Bayesian,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Confidence weighting used in the group softmax.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Checkpoint file.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON-lines file of `{"id", "embedding"}` records.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}
