use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "mibids", version, about = "Train and run attack classifiers on SNMP-MIB interface counters")]
pub struct Cli {
    /// Seed for synthesis, splitting and training [default: 42]
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Only print primary output (reports, predictions)
    #[arg(long, short, global = true)]
    pub quiet: bool,

    /// Also write a JSON summary of the command to this path
    #[arg(long, global = true, value_name = "PATH")]
    pub report: Option<PathBuf>,

    /// TOML file with defaults for any option; flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic labeled dataset
    Generate(GenerateArgs),
    /// Select features, split, train and save a model
    Train(TrainArgs),
    /// Score a model on labeled data
    Evaluate(EvaluateArgs),
    /// Label feature rows; writes CSV to stdout
    Predict(PredictArgs),
    /// Poll an SNMP agent and write per-interval counter deltas
    Collect(CollectArgs),
    /// Print a model file's metadata
    Inspect(InspectArgs),
    /// Serve fixture counters as a loopback SNMPv2c agent
    StubAgent(StubArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Scenario TOML file
    #[arg(long, conflicts_with = "default")]
    pub scenario: Option<PathBuf>,
    /// Use the bundled eight-class scenario (the default when no file is given)
    #[arg(long)]
    pub default: bool,
    /// Output CSV path
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Labeled dataset CSV
    pub data: PathBuf,
    /// tree, forest, adaboost or mlp
    #[arg(long)]
    pub model: Option<String>,
    /// Output model path
    #[arg(long, short)]
    pub out: PathBuf,
    /// Feature group to train on [default: interface]
    #[arg(long)]
    pub group: Option<String>,
    /// TOML file defining extra feature groups
    #[arg(long, value_name = "PATH")]
    pub groups_file: Option<PathBuf>,
    /// Training fraction of the holdout split [default: 0.7]
    #[arg(long)]
    pub split: Option<f64>,
    /// Split each class separately
    #[arg(long)]
    pub stratified: bool,
    /// Keep only the k features most correlated with the classes
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Forest size [default: 100]
    #[arg(long)]
    pub trees: Option<usize>,
    /// Features tried per forest node [default: floor(log2 M) + 1]
    #[arg(long)]
    pub features: Option<usize>,
    /// Boosting rounds [default: 10]
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Perceptron epochs [default: 500]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Perceptron learning rate [default: 0.3]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Perceptron momentum [default: 0.2]
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Hidden units [default: (features + classes) / 2, rounded up]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Minimum leaf weight [default: 2 for tree and adaboost, 1 for forest]
    #[arg(long)]
    pub min_leaf: Option<f64>,
    /// Disable pessimistic pruning
    #[arg(long)]
    pub no_prune: bool,
    /// Pruning confidence factor [default: 0.25]
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Train forest trees on one thread
    #[arg(long)]
    pub no_parallel: bool,
    /// Skip min-max scaling for the perceptron
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Model file
    pub model: PathBuf,
    /// Labeled CSV to score
    pub data: PathBuf,
    /// DATA is the training dataset: replay the recorded split and score
    /// only the held-out part
    #[arg(long)]
    pub heldout: bool,
    /// Write actual and predicted labels per row to this CSV
    #[arg(long, value_name = "PATH")]
    pub predictions: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model file
    pub model: PathBuf,
    /// Feature CSV; a trailing class column is ignored
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct CollectArgs {
    /// Agent address, host or host:port [default port: 161]
    #[arg(long)]
    pub agent: Option<String>,
    /// Community string [default: public]
    #[arg(long)]
    pub community: Option<String>,
    /// ifIndex of the interface to poll [default: 1]
    #[arg(long)]
    pub if_index: Option<u32>,
    /// Seconds between polls [default: 5]
    #[arg(long)]
    pub interval: Option<f64>,
    /// Number of polls [default: 12]
    #[arg(long, conflicts_with = "duration")]
    pub count: Option<usize>,
    /// Total seconds to poll for (count = duration / interval)
    #[arg(long)]
    pub duration: Option<f64>,
    /// Seconds to wait for each response [default: 1]
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Retries per poll [default: 1]
    #[arg(long)]
    pub retries: Option<u32>,
    /// Consecutive failed polls before giving up [default: 5]
    #[arg(long)]
    pub max_failures: Option<u32>,
    /// Output CSV path
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    pub model: PathBuf,
}

#[derive(Args, Debug)]
pub struct StubArgs {
    /// Counter fixture CSV
    #[arg(long)]
    pub fixture: PathBuf,
    /// Address to listen on
    #[arg(long, default_value = "127.0.0.1:1161")]
    pub bind: String,
    #[arg(long, default_value_t = 1)]
    pub if_index: u32,
    #[arg(long, default_value = "public")]
    pub community: String,
}

/// Optional defaults read from `--config`.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub quiet: Option<bool>,
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub generate: GenerateConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub collect: CollectConfig,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub scenario: Option<PathBuf>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: Option<String>,
    pub group: Option<String>,
    pub groups_file: Option<PathBuf>,
    pub split: Option<f64>,
    pub stratified: Option<bool>,
    pub top_k: Option<usize>,
    pub trees: Option<usize>,
    pub features: Option<usize>,
    pub rounds: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub hidden: Option<usize>,
    pub min_leaf: Option<f64>,
    pub prune: Option<bool>,
    pub confidence: Option<f64>,
    pub parallel: Option<bool>,
    pub normalize: Option<bool>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct CollectConfig {
    pub agent: Option<String>,
    pub community: Option<String>,
    pub if_index: Option<u32>,
    pub interval: Option<f64>,
    pub count: Option<usize>,
    pub duration: Option<f64>,
    pub timeout: Option<f64>,
    pub retries: Option<u32>,
    pub max_failures: Option<u32>,
}
