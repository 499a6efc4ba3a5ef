mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Explain black-box binary classifiers with short programs.
#[derive(Parser, Debug)]
#[command(name = "progex", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Induce a program explaining one prediction.
    Explain(ExplainArgs),
    /// Translate a tree, linear model, decision list or decision set into a program.
    Compile(CompileArgs),
    /// Train a baseline classifier and write it to a model file.
    Train(TrainArgs),
    /// Exhaustively search small programs on one batch (for verification).
    Oracle(OracleArgs),
    /// Answer prediction requests for a model file over the wire protocol.
    Serve(ServeArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Tree,
    Forest,
    Logistic,
    Remote,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::Logistic => "logistic",
            ModelKind::Remote => "remote",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReprKind {
    Tree,
    Linear,
    RuleList,
    RuleSet,
}

/// Training hyperparameters shared by `train` and on-the-fly models.
#[derive(Args, Debug, Clone)]
pub struct TrainingArgs {
    /// Depth limit for trees and forest members.
    #[arg(long, default_value_t = 4)]
    max_depth: usize,
    /// Number of trees in a forest.
    #[arg(long, default_value_t = 25)]
    trees: usize,
    /// Gradient-descent epochs for logistic regression.
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    /// Seed for forest bootstrapping.
    #[arg(long, default_value_t = 0)]
    train_seed: u64,
}

/// Where the labelled batch comes from.
#[derive(Args, Debug)]
pub struct BatchArgs {
    /// Dataset CSV; its rows supply the instance and the sampling marginals.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Schema sidecar JSON.
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Tree)]
    model: ModelKind,
    /// Saved model; without it the model is trained on --data.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Remote model: a shell command speaking the protocol on stdio, or tcp://host:port.
    #[arg(long)]
    cmd: Option<String>,
    /// Seconds to wait for a remote model before giving up.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
    /// Row of the dataset to explain.
    #[arg(long, default_value_t = 0)]
    instance: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long)]
    kernel_width: Option<f64>,
    /// Sampling and search seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the labelled batch as CSV.
    #[arg(long)]
    dump_batch: Option<PathBuf>,
    /// Use a previously dumped batch instead of sampling.
    #[arg(long, conflicts_with_all = ["model_file", "cmd", "dump_batch"])]
    replay_batch: Option<PathBuf>,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    /// JSON file of search settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    initial_temperature: Option<f64>,
    /// weighted-f1 or weighted-01.
    #[arg(long)]
    loss: Option<String>,
    /// Allow arithmetic and real-valued programs in the search.
    #[arg(long)]
    arith: bool,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[command(flatten)]
    batch: BatchArgs,
    #[command(flatten)]
    search: SearchArgs,
    /// Write the JSON report here.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    batch: BatchArgs,
    #[arg(long, default_value_t = 7)]
    max_nodes: usize,
    #[arg(long, default_value = "weighted-f1")]
    loss: String,
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompileArgs {
    #[arg(long, value_enum)]
    kind: ReprKind,
    /// Representation file.
    #[arg(long)]
    file: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Replace the result with its smallest equivalent (all-boolean schemas only).
    #[arg(long)]
    simplify: bool,
    #[arg(long, default_value_t = 7)]
    max_nodes: usize,
    /// Class treated as positive when rule labels are class names.
    #[arg(long)]
    positive: Option<String>,
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    training: TrainingArgs,
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    model_file: PathBuf,
    /// Listen on this address instead of stdio, e.g. 127.0.0.1:7070.
    #[arg(long)]
    tcp: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Explain(a) => commands::explain(a),
        Command::Compile(a) => commands::compile(a),
        Command::Train(a) => commands::train(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Serve(a) => commands::serve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
