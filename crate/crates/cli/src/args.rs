use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "zorro", version, about = "Explain GNN node predictions and evaluate the explanations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the BA-Community benchmark dataset.
    SynthGen(SynthGenArgs),
    /// Train a GCN on a dataset directory.
    Train(TrainArgs),
    /// Explain the predictions for a set of query nodes.
    Explain(ExplainArgs),
    /// Search several disjoint explanations per query node.
    MultiExplain(ExplainArgs),
    /// Compute metrics for saved explanations.
    Evaluate(EvaluateArgs),
    /// Remove-and-retrain evaluation of global feature importance.
    Roar(RoarArgs),
    /// Ground-truth precision per training snapshot and its rank
    /// correlation with test accuracy.
    GtEval(GtEvalArgs),
}

/// Dataset inputs: a directory and/or individual files overriding it.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Dataset directory (graph.txt, features.csv, labels.csv, split.csv).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthGenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 300)]
    pub base_nodes: usize,
    #[arg(long, default_value_t = 5)]
    pub attachment: usize,
    #[arg(long, default_value_t = 80)]
    pub houses: usize,
    #[arg(long, default_value_t = 0.0001)]
    pub perturbation_rate: f64,
    #[arg(long, default_value_t = 0.01)]
    pub bridge_fraction: f64,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    Gcn2,
    Gcn3Stack,
}

/// Training hyper-parameters; unset values come from the architecture's
/// recipe.
#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainParams {
    #[arg(long, value_enum, default_value_t = Arch::Gcn2)]
    pub arch: Arch,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub params: TrainParams,
    /// Epochs after which to save a snapshot (0 = initialisation).
    #[arg(long, value_delimiter = ',')]
    pub snapshot_epochs: Vec<usize>,
    /// Output directory for model.json, training.csv and snapshots.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplainerArg {
    Zorro,
    Empty,
    Random,
    Grad,
    GradInput,
}

impl ExplainerArg {
    pub fn name(self) -> &'static str {
        match self {
            ExplainerArg::Zorro => "zorro",
            ExplainerArg::Empty => "empty",
            ExplainerArg::Random => "random",
            ExplainerArg::Grad => "grad",
            ExplainerArg::GradInput => "grad-input",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ZorroParams {
    #[arg(long, default_value_t = 0.85)]
    pub tau: f64,
    /// Candidates of each kind evaluated per greedy step.
    #[arg(long = "k", default_value_t = 10)]
    pub top_k: usize,
    /// Monte-Carlo samples per fidelity estimate.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long)]
    pub max_elements: Option<usize>,
    #[arg(long, default_value_t = 32)]
    pub max_explanations: usize,
    #[arg(long, default_value_t = 16)]
    pub max_depth: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Query nodes: `all`, `train`, `test`, `ground-truth`, `<N>-random`
    /// or a comma-separated list.
    #[arg(long, default_value = "all")]
    pub nodes: String,
    #[arg(long, value_enum, default_value_t = ExplainerArg::Zorro)]
    pub explainer: ExplainerArg,
    #[command(flatten)]
    pub zorro: ZorroParams,
    /// Mask sizes of the random explainer.
    #[arg(long, default_value_t = 5)]
    pub random_nodes: usize,
    #[arg(long, default_value_t = 5)]
    pub random_features: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, env = "ZORRO_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Directory of explanation files written by `explain`.
    #[arg(long)]
    pub explanations: PathBuf,
    /// Value of removed entries for validity and occlusion fidelity.
    #[arg(long, default_value_t = 0.0)]
    pub baseline: f64,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Binarisation of soft masks: `S-0.5`, `S-0.7`, `NT`, `top:<x>`, `nt:<t>`.
    #[arg(long, default_value = "S-0.5")]
    pub transform: String,
    #[arg(long, env = "ZORRO_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RoarArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Explanations of training nodes whose feature masks are aggregated.
    #[arg(long)]
    pub explanations: PathBuf,
    #[arg(long = "k", value_delimiter = ',', required = true)]
    pub k_values: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[command(flatten)]
    pub params: TrainParams,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GtEvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model snapshots, as written by `train --snapshot-epochs`.
    #[arg(long, num_args = 1.., required = true)]
    pub snapshots: Vec<PathBuf>,
    #[arg(long, default_value = "ground-truth")]
    pub nodes: String,
    #[arg(long, value_enum, default_value_t = ExplainerArg::Zorro)]
    pub explainer: ExplainerArg,
    #[command(flatten)]
    pub zorro: ZorroParams,
    #[arg(long, default_value_t = 5)]
    pub random_nodes: usize,
    #[arg(long, default_value_t = 5)]
    pub random_features: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "ZORRO_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}
