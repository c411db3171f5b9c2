use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use npt_core::npt::SignatureFormat;
use npt_core::ErrorKind;

mod commands;
mod output;

#[derive(Parser, Debug)]
#[command(name = "npt", version, about = "Nonparanormal transport distances between empirical distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded (rho, lambda) grid of nonparanormal samples as CSV.
    Simulate(SimulateArgs),
    /// Compute distance matrices for one or more metrics.
    Distances(DistancesArgs),
    /// Time single-pair and full-matrix computations per metric.
    Bench(BenchArgs),
    /// Classical MDS of a squared distance matrix.
    Mds(MdsArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10)]
    pub rows: usize,
    #[arg(long, default_value_t = 10)]
    pub cols: usize,
    /// Samples per distribution.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long, short)]
    pub output: PathBuf,
}

/// Input and metric options shared by `distances` and `bench`.
#[derive(Args, Debug)]
pub struct InputArgs {
    /// Long-format CSV: one row per sample, an id column plus value columns.
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the id column.
    #[arg(long, default_value = "id")]
    pub id_column: String,
    /// Comma-separated value columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub value_columns: Option<Vec<String>>,
    /// Run directory; created if missing.
    #[arg(long)]
    pub output_dir: PathBuf,
    /// e.g. `npt,exact,sliced:L=10,sinkhorn:eps=0.1`
    #[arg(long, default_value = "npt")]
    pub metrics: String,
    /// Quantile grid size.
    #[arg(long)]
    pub m: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Seed for randomized metrics and pair selection.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Skip pooled median/SD standardization.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum CacheFormat {
    Json,
    Csv,
}

impl From<CacheFormat> for SignatureFormat {
    fn from(f: CacheFormat) -> Self {
        match f {
            CacheFormat::Json => SignatureFormat::Json,
            CacheFormat::Csv => SignatureFormat::CsvBundle,
        }
    }
}

#[derive(Args, Debug)]
pub struct DistancesArgs {
    #[command(flatten)]
    pub common: InputArgs,
    /// Metric whose matrix serves as ground truth for error statistics.
    #[arg(long)]
    pub reference: Option<String>,
    /// Compute the reference metric on this (typically larger-n) dataset
    /// instead of the main input. Ids must match.
    #[arg(long, requires = "reference")]
    pub reference_input: Option<PathBuf>,
    /// Write NPT signatures here after phase 1.
    #[arg(long)]
    pub save_signatures: Option<PathBuf>,
    /// Reuse NPT signatures from a previous run instead of recomputing them.
    #[arg(long, conflicts_with = "save_signatures")]
    pub load_signatures: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CacheFormat::Json)]
    pub signature_format: CacheFormat,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: InputArgs,
    #[arg(long, default_value_t = 100)]
    pub reps_single: usize,
    #[arg(long, default_value_t = 5)]
    pub reps_matrix: usize,
}

#[derive(Args, Debug)]
pub struct MdsArgs {
    /// Square CSV of squared distances with an id header row and column.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    /// Run directory; created if missing.
    #[arg(long)]
    pub output_dir: PathBuf,
    /// CSV of per-distribution covariates, left-joined on id.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    #[arg(long, default_value = "id")]
    pub covariate_id: String,
    /// Second matrix over the same ids; its embedding is Procrustes-aligned
    /// to this one and the residual reported.
    #[arg(long)]
    pub align_to: Option<PathBuf>,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Distances(a) => commands::distances(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Mds(a) => commands::mds(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
