//! `amc`: generate, split, train, evaluate and classify from the shell.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O or parse, 4 training failure,
//! 5 geometry mismatch.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "amc", version, about = "Modulation-classification workbench")]
struct Cli {
    /// Worker threads for generation (defaults to all cores).
    #[arg(long, global = true, env = "AMC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a dataset directory (container, manifest, channel log).
    Generate(GenerateArgs),
    /// Write stratified train/val/test index files into a dataset.
    Split(SplitArgs),
    /// Train the CNN on a dataset's train/val splits.
    Train(TrainArgs),
    /// Accuracy-by-SNR and confusion reports for a checkpoint.
    Eval(EvalArgs),
    /// Per-record predictions for a container file.
    Classify(ClassifyArgs),
    /// Summarize a dataset directory or a checkpoint.
    Inspect(InspectArgs),
    /// Print raised-cosine taps, one per line.
    Taps(TapsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NumericMode {
    /// 64-bit arithmetic.
    Reference,
    /// 32-bit arithmetic.
    Fast,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// key=value generation config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Two signals per cell instead of the configured count.
    #[arg(long)]
    pub desk_scale: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// train,val,test as fractions, decimals or a/b ratios.
    #[arg(long, default_value = "8/15,2/15,1/3")]
    pub ratios: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// key=value file mirroring the flags below; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Checkpoint path; `.meta` and `.history.tsv` are written beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// family or variant.
    #[arg(long)]
    pub labels: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub min_delta: Option<f64>,
    /// Four comma-separated conv filter counts.
    #[arg(long)]
    pub filters: Option<String>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<NumericMode>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Report file to write.
    #[arg(long)]
    pub report: PathBuf,
    /// Split to evaluate; the whole dataset when the split is absent.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value = "structured")]
    pub format: String,
    /// Accuracies as percentages in the table format.
    #[arg(long)]
    pub percent: bool,
    #[arg(long, value_enum, default_value = "reference")]
    pub mode: NumericMode,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// A container file or a dataset directory.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "reference")]
    pub mode: NumericMode,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TapsArgs {
    #[arg(long, default_value_t = 0.35)]
    pub rolloff: f64,
    #[arg(long, default_value_t = 8)]
    pub span: usize,
    #[arg(long, default_value_t = 2)]
    pub oversampling: usize,
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<amc_core::Error> for Failure {
    fn from(e: amc_core::Error) -> Self {
        use amc_core::Error as E;
        let code = match &e {
            E::Parse { .. } | E::Io { .. } => 3,
            E::Training { .. } => 4,
            E::Geometry { .. } => 5,
            E::Nn(amc_nn::NnError::Shape { .. }) => 5,
            E::Nn(amc_nn::NnError::NonFinite(_)) => 4,
            E::Nn(amc_nn::NnError::Checkpoint { .. } | amc_nn::NnError::Io(_)) => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Split(a) => commands::split(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Classify(a) => commands::classify(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Taps(a) => commands::taps(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
