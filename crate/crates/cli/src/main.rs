//! `deplm`: OLS inference under dependent errors from the command line.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use deplm::KernelId;

#[derive(Debug, Parser)]
#[command(
    name = "deplm",
    version,
    about = "OLS inference with short-range dependent errors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit OLS and report β̂, d_j(n), C_n and corrected per-coefficient tests.
    Fit(FitArgs),
    /// Corrected test of β_j = 0 (one index) or of a joint null (several).
    Test(TestArgs),
    /// Residual (or raw series) autocovariances and the suggested bandwidth.
    Autocov(AutocovArgs),
    /// Design regularity diagnostics.
    Diagnose(DiagnoseArgs),
    /// Monte Carlo level/power study under the Markov-chain error process.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Paper,
    Bartlett,
    Rectangular,
}

impl From<KernelArg> for KernelId {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Paper => KernelId::Paper,
            KernelArg::Bartlett => KernelId::Bartlett,
            KernelArg::Rectangular => KernelId::Rectangular,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthArg {
    Auto,
    Fixed(f64),
}

fn parse_bandwidth(s: &str) -> Result<BandwidthArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(BandwidthArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(h) if h.is_finite() && h > 0.0 => Ok(BandwidthArg::Fixed(h)),
        _ => Err(format!("expected 'auto' or a positive number, got '{s}'")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Response column, by header name or 0-based position.
    #[arg(long)]
    pub response: Option<String>,
    /// Prepend a column of ones to the design.
    #[arg(long)]
    pub add_intercept: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CovArgs {
    #[arg(long, value_enum, default_value = "paper")]
    pub kernel: KernelArg,
    /// `auto` or a positive real.
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    pub bandwidth: BandwidthArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cov: CovArgs,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Also write C_n as CSV here, with a `.json` sidecar next to it.
    #[arg(long)]
    pub covariance_output: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cov: CovArgs,
    /// 0-based design column indices, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub indices: Vec<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AutocovArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Use the response column itself as the series instead of residuals.
    #[arg(long)]
    pub raw: bool,
    #[arg(long, default_value_t = 30)]
    pub max_lag: usize,
    #[arg(long, value_enum, default_value = "paper")]
    pub kernel: KernelArg,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 5)]
    pub max_lag: usize,
    /// `j,l,k` for the ρ̂ stability probe; defaults to the last column
    /// against itself at lag 1.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub rho: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub splits: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Where to write the `prefix_n,value` stability CSV.
    #[arg(long)]
    pub rho_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub model: u8,
    /// Slope coefficients: β_1 for model 1, β_1,β_2 for model 2 (zeros when
    /// omitted).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = deplm::simulation::DEFAULT_BETA0, allow_negative_numbers = true)]
    pub beta0: f64,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, default_value = "auto", value_parser = parse_bandwidth)]
    pub bandwidth: BandwidthArg,
    #[arg(long, value_enum, default_value = "paper")]
    pub kernel: KernelArg,
    #[arg(long, default_value_t = 2000)]
    pub replications: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Run replications on the calling thread only.
    #[arg(long)]
    pub serial: bool,
    /// Write replication 0 of the first `n` as a `y,x0,x1,…` CSV.
    #[arg(long)]
    pub emit_data: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::fit(&args),
        Command::Test(args) => commands::test(&args),
        Command::Autocov(args) => commands::autocov(&args),
        Command::Diagnose(args) => commands::diagnose(&args),
        Command::Simulate(args) => commands::simulate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
