//! `lear` — day-ahead electricity price forecasting from the command
//! line.
//!
//! The four subcommands mirror the analysis workflow: `ingest` raw
//! market data, `backtest` a rolling forecaster over a date range,
//! `explain` one day's predictions coefficient by coefficient, and
//! `report` error diagnostics with extreme-price segmentation.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

/// Exit codes: 0 success, 1 I/O, 2 validation/coverage, 3 invariant
/// violation.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<lear::Error> for CliError {
    fn from(e: lear::Error) -> CliError {
        match e {
            lear::Error::Io(_) => CliError::Io(e.to_string()),
            lear::Error::Csv(ref inner) if inner.is_io_error() => CliError::Io(e.to_string()),
            lear::Error::NonFinitePrediction { .. } => CliError::Invariant(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "lear",
    version,
    about = "Day-ahead electricity price forecasting with a LASSO-estimated autoregressive model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Values may also come from a TOML
/// config file; explicit flags win on conflict.
#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// TOML config file supplying defaults for the other flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input data CSV
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random seed recorded in the run manifest
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Input uses the wide layout (timestamp plus one column per series)
    #[arg(long)]
    pub wide: bool,
    /// Skip unparseable rows with a warning instead of aborting
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Args, Debug)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// First forecast day (default: earliest feasible)
    #[arg(long)]
    pub from: Option<NaiveDate>,
    /// Last forecast day (default: last day of the dataset)
    #[arg(long)]
    pub to: Option<NaiveDate>,
    /// Calibration window length in days
    #[arg(long)]
    pub window_days: Option<u32>,
    /// Recalibrate every N days
    #[arg(long)]
    pub recalib_every: Option<u32>,
    /// Feature/target normalization: zscore | asinh
    #[arg(long)]
    pub scaling: Option<String>,
    /// Penalty selection criterion: aic | bic
    #[arg(long)]
    pub criterion: Option<String>,
    /// Write one model snapshot JSON per calibration
    #[arg(long)]
    pub snapshots: bool,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Day to decompose
    #[arg(long)]
    pub day: NaiveDate,
    /// Delivery hour 0-23 (default: all 24)
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..24))]
    pub hour: Option<u8>,
    /// Reuse a model snapshot instead of recalibrating
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    #[arg(long)]
    pub window_days: Option<u32>,
    #[arg(long)]
    pub scaling: Option<String>,
    #[arg(long)]
    pub criterion: Option<String>,
    /// Re-run prediction and fail (exit 3) unless the contribution sum
    /// reproduces it to 1e-9
    #[arg(long)]
    pub verify: bool,
    /// Emit zero coefficients too
    #[arg(long)]
    pub dense: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// forecasts.csv produced by the backtest command
    #[arg(long)]
    pub forecasts: PathBuf,
    /// Spike threshold in rolling standard deviations
    #[arg(long)]
    pub spike_sigma: Option<f64>,
    /// Trailing window for the rolling statistics, in days
    #[arg(long)]
    pub spike_window_days: Option<u32>,
    /// Also segment prices below this trailing quantile
    #[arg(long)]
    pub low_quantile: Option<f64>,
    /// Render the error-vs-price scatter as SVG
    #[arg(long)]
    pub svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, impute and validate a market CSV into canonical form
    Ingest(IngestArgs),
    /// Roll a recalibrating forecaster over a date range
    Backtest(BacktestArgs),
    /// Decompose one day's predictions into per-feature contributions
    Explain(ExplainArgs),
    /// Error metrics, error-vs-price points and extreme-price segments
    Report(ReportArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest(args),
        Command::Backtest(args) => commands::backtest(args),
        Command::Explain(args) => commands::explain(args),
        Command::Report(args) => commands::report(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
