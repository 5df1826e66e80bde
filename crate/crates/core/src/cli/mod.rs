//! Batch experiment driver behind the `structlearn` binary.
//!
//! Every command accepts `--config <file.json>` holding a flat object whose
//! keys are the long flag names with `_` for `-`; flags given on the command
//! line override the file.

mod commands;
mod config;
mod output;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{LearnGraphConfig, LinkPredictConfig, NodeClassifyConfig, RecommendConfig};
pub use output::{LedgerRow, MethodSummary, Summary, TrialFailure, WilcoxonEntry};

/// Exit status for usage and configuration errors.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        use crate::Error as E;
        match e {
            E::IsolatedNode(_) | E::ZeroDegree(_) | E::ZeroNorm { .. } | E::EmptyGraph => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "structlearn",
    version,
    about = "Graph structure learning experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a graph from point embeddings or a distance edge list.
    LearnGraph(LearnGraphArgs),
    /// Semi-supervised node classification (GCN baseline and learned-graph GCN).
    NodeClassify(NodeClassifyArgs),
    /// Link prediction (VGAE baseline and grafted-graph VGAE).
    LinkPredict(LinkPredictArgs),
    /// Implicit-feedback recommendation with negative-pool refinement.
    Recommend(RecommendArgs),
    /// Summarize a ledger into markdown and CSV tables with Wilcoxon p-values.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for independent trials.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Exact neighbour search everywhere, for bit-for-bit reruns.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LearnGraphArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// CSV of point embeddings, one row per node.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Edge list of distances (`#nodes=N` header, `i<TAB>j<TAB>d` lines).
    #[arg(long)]
    pub distances: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub target_degree: Option<f64>,
    /// Fixed α; requires `--beta` and disables density targeting.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub approximate: bool,
    #[arg(long)]
    pub ef: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub allow_nonconverged: bool,
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    /// `cora`, `citeseer` or `synthetic` (citation tasks); `ml100k` or
    /// `synthetic` (recommendation).
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub target_degree: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct NodeClassifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trial: TrialArgs,
    #[arg(long)]
    pub content: Option<PathBuf>,
    #[arg(long)]
    pub cites: Option<PathBuf>,
    #[arg(long)]
    pub labels_per_class: Option<usize>,
    #[arg(long)]
    pub val_size: Option<usize>,
    /// Also record the GCN baseline.
    #[arg(long)]
    pub baseline_also: bool,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated δ values chosen by validation accuracy.
    #[arg(long, value_delimiter = ',')]
    pub delta_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub densify_union: bool,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub mc_rate: Option<f64>,
    #[arg(long)]
    pub vgae_epochs: Option<usize>,
    /// Train the final GCN on the observed graph (reduces to the baseline
    /// when combined with `--mc-samples 1 --mc-rate 0`).
    #[arg(long)]
    pub no_graph_learning: bool,
}

#[derive(Debug, Args)]
pub struct LinkPredictArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trial: TrialArgs,
    #[arg(long)]
    pub content: Option<PathBuf>,
    #[arg(long)]
    pub cites: Option<PathBuf>,
    /// Binarize the learned graph to its top-m edges before grafting.
    #[arg(long)]
    pub binarize: bool,
    #[arg(long)]
    pub top_m: Option<usize>,
    /// Reconstruction target when retraining: `observed` or `grafted`.
    #[arg(long)]
    pub recon: Option<String>,
    #[arg(long)]
    pub identity_graft: bool,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub trial: TrialArgs,
    /// Interaction log (`user<TAB>item[<TAB>rating…]` or `user,item` CSV).
    #[arg(long)]
    pub interactions: Option<PathBuf>,
    #[arg(long)]
    pub th1: Option<usize>,
    #[arg(long)]
    pub th2: Option<usize>,
    #[arg(long)]
    pub min_rating: Option<f64>,
    /// Comma-separated refinement fractions.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub score_scale: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub continuation_patience: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Ledger CSV written by the experiment commands.
    pub ledger: PathBuf,
    /// Markdown output; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::LearnGraph(a) => commands::learn_graph(a),
        Command::NodeClassify(a) => commands::node_classify(a),
        Command::LinkPredict(a) => commands::link_predict(a),
        Command::Recommend(a) => commands::recommend(a),
        Command::Report(a) => report::report(a),
    }
}
