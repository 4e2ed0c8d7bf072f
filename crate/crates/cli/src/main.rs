mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::CliError;

pub const DEFAULT_SIMS: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(
    name = "dgof",
    version,
    about = "Monte-Carlo goodness-of-fit tests for discrete distributions",
    after_help = "ENVIRONMENT:\n  DGOF_WORKERS  default for --workers (0 or unset uses every core)\n\n\
                  EXIT STATUS:\n  0 success, 2 usage or data error, 3 numerical failure\n\n\
                  Bundled datasets can be used anywhere a file is expected as builtin:NAME,\n\
                  e.g. --data builtin:candy --model builtin:candy-model."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Estimate P-values for observed counts against a model.
    Test(TestArgs),
    /// Repeat the KS test under several bin orderings.
    Trials(TrialsArgs),
    /// Check one of the asymptotic claims numerically.
    Theory(TheoryArgs),
    /// Test a stream of integer draws for uniformity over 1..=M.
    RngUniform(RngArgs),
    /// Write plot data as CSV.
    Plot(PlotArgs),
    /// Print a bundled dataset.
    Dataset(DatasetArgs),
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct RunArgs {
    /// Number of Monte-Carlo simulations.
    #[arg(long, default_value_t = DEFAULT_SIMS)]
    pub sims: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core. Does not change results.
    #[arg(long, env = "DGOF_WORKERS", default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct DataArgs {
    /// Counts CSV with header `label,count`.
    #[arg(long)]
    pub data: Option<String>,
    /// uniform:M, poisson:LAMBDA, hw, or a `label,prob` CSV file.
    #[arg(long)]
    pub model: Option<String>,
    /// Comma-separated statistics: ks, euclid, chi2, g2, ft, l1.
    #[arg(long)]
    pub stats: Option<String>,
    /// identity, lexicographic, random:T, or perm:I,J,... (1-based bins).
    /// Defaults to lexicographic for hw and identity otherwise.
    #[arg(long)]
    pub ordering: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct OutputArgs {
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct TrialsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of orderings; trial 1 uses --ordering, the rest are pseudorandom.
    #[arg(long, default_value_t = 10)]
    pub trials: u64,
    /// Also write the per-trial P-values as CSV to this file.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Claim {
    /// Mean maximum of a shuffled +/-1 walk against sqrt(pi/2) ln 2.
    Bridge,
    /// Null mean of the squared Euclidean distance against (1 - sum p^2)/n.
    NullEuclid,
    /// Null mean of sqrt(n) times the KS statistic against sqrt(pi/2) ln 2.
    NullKs,
    /// Euclidean and KS distances of the equal-magnitude alternative.
    Power,
    /// Sparse Euclidean distance of uniform draws over a huge support.
    SparseLimit,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct TheoryArgs {
    #[arg(value_enum)]
    pub claim: Claim,
    /// Number of bins.
    #[arg(long)]
    pub m: Option<u64>,
    /// Number of draws.
    #[arg(long)]
    pub n: Option<u64>,
    /// Per-bin difference for the power scenario.
    #[arg(long)]
    pub c: Option<f64>,
    /// Support size for sparse-limit.
    #[arg(long = "M", visible_alias = "support")]
    pub support: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "DGOF_WORKERS", default_value_t = 0)]
    pub workers: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct RngArgs {
    /// File of draws, one integer in 1..=M per line.
    #[arg(long, conflicts_with = "generate")]
    pub draws: Option<String>,
    /// Read --draws as little-endian u32 words holding draw - 1.
    #[arg(long, requires = "draws")]
    pub binary: bool,
    /// sequential:N (draws 1..=N) or uniform:N (N draws from this tool's
    /// generator, seeded by --data-seed).
    #[arg(long)]
    pub generate: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Support size M.
    #[arg(long = "support", visible_alias = "M", default_value_t = 1u64 << 32)]
    pub support: u64,
    /// ks, euclid, or both.
    #[arg(long, default_value = "ks,euclid")]
    pub stats: String,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct PlotArgs {
    /// poisson-pmf-observed, poisson-pmf-simulated, poisson-cmf-observed,
    /// poisson-cmf-simulated, or trial-pvalues.
    pub experiment: String,
    /// For trial-pvalues: the test to repeat.
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 10)]
    pub trials: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct DatasetArgs {
    /// rhesus, candy, candy-model, or poisson-observations.
    #[arg(required_unless_present = "list")]
    pub name: Option<String>,
    #[arg(long)]
    pub list: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dgof: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
