//! `latentlab`: train flows and VAEs over embedding records, quantize with
//! codebooks, run latent-geometry experiments, compute evaluation metrics,
//! and annotate AMR triples — all deterministic under an explicit seed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use latentlab_amr::AmrError;
use latentlab_core::CoreError;

/// Exit codes: 0 success, 2 validation error, 3 runtime error.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub exit: u8,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { message: message.into(), exit: 2 }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError { message: message.into(), exit: 3 }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let exit = match &e {
            CoreError::ShapeMismatch(_)
            | CoreError::IndexOutOfRange { .. }
            | CoreError::InvalidArgument(_)
            | CoreError::EmptyInput(_)
            | CoreError::MissingLabel(_)
            | CoreError::NonScalarOutput(_)
            | CoreError::MalformedRecord { .. } => 2,
            CoreError::NonFinite(_)
            | CoreError::NanLoss { .. }
            | CoreError::UninitializedActNorm
            | CoreError::Io(_)
            | CoreError::Serde(_)
            | CoreError::Checkpoint(_) => 3,
        };
        CliError { message: e.to_string(), exit }
    }
}

impl From<AmrError> for CliError {
    fn from(e: AmrError) -> Self {
        let exit = match &e {
            AmrError::SearchCapExceeded(_) => 3,
            _ => 2,
        };
        CliError { message: e.to_string(), exit }
    }
}

#[derive(Parser)]
#[command(
    name = "latentlab",
    about = "Latent-space geometry toolkit",
    version,
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an invertible flow on embedding records (unsupervised NLL or
    /// cluster-supervised).
    TrainFlow(commands::train::TrainFlowArgs),
    /// Train the toy role-conditional VAE on embedding records.
    TrainVae(commands::train::TrainVaeArgs),
    /// Fit a codebook by EMA updates and quantize the token stream.
    Quantize(commands::vq::QuantizeArgs),
    /// Latent traversal: dimension resampling, Ornstein-Uhlenbeck walks, or
    /// decision-tree guided movement between label regions.
    Traverse(commands::geometry::TraverseArgs),
    /// Interpolate between two records in latent space or token-by-token
    /// through a codebook.
    Interpolate(commands::geometry::InterpolateArgs),
    /// Element-wise latent arithmetic between two records.
    Arith(commands::geometry::ArithArgs),
    /// Nonnegative-combination cone membership tests.
    ConeCheck(commands::geometry::ConeCheckArgs),
    /// Geometric data augmentation by averaging and neighbour traversal.
    Augment(commands::geometry::AugmentArgs),
    /// Evaluation metrics: interpolation smoothness, proxy classifiers,
    /// retention ratios, k-means MSE, PCA projection.
    Metrics(commands::metrics::MetricsArgs),
    /// Gradient-kernel rule-separation diagnostics on the two-rule
    /// benchmark.
    Ntk(commands::ntk::NtkArgs),
    /// Classify AMR (premise, premise, conclusion) triples by inference
    /// type.
    AnnotateAmr(commands::annotate::AnnotateArgs),
}

/// Flags shared by every command.
#[derive(clap::Args, Clone)]
pub struct CommonArgs {
    /// Seed for every random choice the command makes.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (created if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file whose keys mirror the long flags; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for the fixed-reduction-order parallel paths.
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::TrainFlow(args) => commands::train::train_flow(args),
        Command::TrainVae(args) => commands::train::train_vae(args),
        Command::Quantize(args) => commands::vq::quantize(args),
        Command::Traverse(args) => commands::geometry::traverse(args),
        Command::Interpolate(args) => commands::geometry::interpolate(args),
        Command::Arith(args) => commands::geometry::arith(args),
        Command::ConeCheck(args) => commands::geometry::cone_check(args),
        Command::Augment(args) => commands::geometry::augment(args),
        Command::Metrics(args) => commands::metrics::metrics(args),
        Command::Ntk(args) => commands::ntk::ntk(args),
        Command::AnnotateAmr(args) => commands::annotate::annotate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.exit)
        }
    }
}
