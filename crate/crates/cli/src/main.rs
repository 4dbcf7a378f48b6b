use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Exit statuses.
pub const EXIT_TEST_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "lsnet",
    version,
    about = "Sparse Bayesian latent-space models for weighted networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic fixture: truth.json, network.csv, interp.csv.
    Simulate(SimulateArgs),
    /// Run the sampler and write chain.csv and meta.json.
    Fit(FitArgs),
    /// Summarize a chain directory: summary.json, loadings.csv, edgefit.csv, positions.svg.
    Summarize(SummarizeArgs),
    /// Joint-distribution check of the sampler on a micro model.
    Geweke(GewekeArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Restriction {
    Unrestricted,
    Plt,
    Glt,
}

#[derive(Args, Debug, Clone)]
pub struct RestrictionArgs {
    #[arg(long, value_enum, default_value = "plt")]
    pub restriction: Restriction,
    /// Comma-separated 1-based pivot rows, one per latent dimension (GLT only).
    #[arg(long, value_delimiter = ',')]
    pub pivots: Vec<usize>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long)]
    pub dim: usize,
    /// Number of interpretation variables.
    #[arg(long)]
    pub p: usize,
    #[command(flatten)]
    pub restriction: RestrictionArgs,
    /// Rows of Λ forced to zero in the truth.
    #[arg(long, default_value_t = 1)]
    pub zero_rows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub interp: PathBuf,
    /// Latent dimension; must match the pivot count under GLT.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[command(flatten)]
    pub restriction: RestrictionArgs,
    /// Total sweeps, burn-in included.
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub step_alpha: f64,
    #[arg(long, default_value_t = 0.2)]
    pub step_f: f64,
    /// Skip the burn-in orientation search.
    #[arg(long)]
    pub no_orient: bool,
    /// JSON file with hyperparameters; defaults apply otherwise.
    #[arg(long)]
    pub hyper: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SummarizeArgs {
    /// Directory holding chain.csv and meta.json.
    #[arg(long)]
    pub chain: PathBuf,
    /// Network used for the fit; defaults to the path recorded in meta.json.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// truth.json from `simulate`; adds truth markers and RMSE.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Output directory; defaults to the chain directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GewekeArgs {
    #[arg(long, default_value_t = 4)]
    pub nodes: usize,
    #[arg(long, default_value_t = 3)]
    pub p: usize,
    #[command(flatten)]
    pub restriction: RestrictionArgs,
    #[arg(long, default_value_t = 5000)]
    pub draws: usize,
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Largest |z| still counted as agreement.
    #[arg(long, default_value_t = 4.0)]
    pub threshold: f64,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Summarize(a) => commands::summarize(a),
        Command::Geweke(a) => commands::geweke(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
