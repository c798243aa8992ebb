//! `matinar`: simulate, fit, select orders, forecast, diagnose and run
//! Monte-Carlo studies for MAT-INAR(p) count-matrix series.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 invalid input.

mod commands;
mod meta;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matinar::MatinarError;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "matinar", version = meta::VERSION, about = "Matrix-variate INAR(p) toolkit")]
struct Cli {
    /// Worker threads for replications and candidate fits (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a series from a built-in scenario or a params file.
    Simulate(SimulateArgs),
    /// Fit a model of order --p (or the IC-selected order) to a series.
    Fit(FitArgs),
    /// Compute the information-criterion curve over orders 1..=p-bar.
    SelectOrder(SelectOrderArgs),
    /// Iterated conditional-mean forecasts from fitted parameters.
    Forecast(ForecastArgs),
    /// In-sample MRSS, portmanteau table and, with a horizon, MSPE/CMPE.
    Diagnose(DiagnoseArgs),
    /// Monte-Carlo bias/SD/SE tables or order-selection frequencies.
    Replicate(ReplicateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Built-in scenario name (A, D, random-p1, random-p2).
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    pub scenario: Option<String>,
    /// Parameter JSON file.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long = "T", value_name = "T")]
    pub t_len: usize,
    #[arg(long, default_value_t = matinar::process::DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[arg(long)]
    pub seed: u64,
    /// Simulate even if the companion spectral radius is at least one.
    #[arg(long)]
    pub force_nonstationary: bool,
    /// Output directory for series.csv, params.json and simulate.json.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Series CSV (`t,row,col,value`).
    #[arg(long)]
    pub data: PathBuf,
    /// Model order; selected by IC over 1..=p-bar when omitted.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 6)]
    pub p_bar: usize,
    #[arg(long, default_value = "icls")]
    pub method: String,
    /// Fit on the first N observations only.
    #[arg(long)]
    pub train: Option<usize>,
    /// Parametric-bootstrap replicates for projection A/B standard errors.
    #[arg(long, default_value_t = 200)]
    pub bootstrap_reps: usize,
    /// Seed for resampling-based standard errors.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest portmanteau delay in the residual diagnostics.
    #[arg(long, default_value_t = 24)]
    pub max_delay: usize,
    /// Output directory for fit.json and params.json.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectOrderArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub p_bar: usize,
    #[arg(long, default_value = "icls")]
    pub method: String,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for order.json and ic_curve.csv.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ForecastArgs {
    /// Fitted parameter JSON.
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    /// Forecast origin: condition on the first N observations (default: all).
    #[arg(long)]
    pub train: Option<usize>,
    /// Also report count forecasts rounded this way.
    #[arg(long, value_parser = ["nearest", "floor"])]
    pub rounding: Option<String>,
    /// Output directory for forecast.json (and cmpe.csv when held-out data exist).
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Training prefix length; the rest is held out (default: all data).
    #[arg(long)]
    pub train: Option<usize>,
    /// Out-of-sample horizon for MSPE/CMPE (0 = in-sample only).
    #[arg(long, default_value_t = 0)]
    pub horizon: usize,
    #[arg(long, default_value_t = 24)]
    pub max_delay: usize,
    /// Output directory for diagnostics.json and cmpe.csv.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplicateArgs {
    #[arg(long, default_value = "A")]
    pub scenario: String,
    #[arg(long)]
    pub reps: usize,
    /// Comma-separated series lengths.
    #[arg(long = "T", value_name = "T", value_delimiter = ',', required = true)]
    pub t_values: Vec<usize>,
    #[arg(long, default_value_t = matinar::process::DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[arg(long)]
    pub seed: u64,
    /// Comma-separated estimation methods.
    #[arg(long, value_delimiter = ',', default_value = "proj,icls")]
    pub method: Vec<String>,
    #[arg(long, default_value_t = 200)]
    pub bootstrap_reps: usize,
    /// Run the order-selection study instead of the estimation study.
    #[arg(long)]
    pub order_study: bool,
    #[arg(long, default_value_t = 6)]
    pub p_bar: usize,
    /// Keep one random truth for the whole study instead of redrawing it
    /// in every replication.
    #[arg(long)]
    pub fixed_truth: bool,
    /// Output directory for replicate.json and replicate.txt.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<MatinarError>() {
        Some(e) if !e.is_validation() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::SelectOrder(a) => commands::select_order(a),
        Command::Forecast(a) => commands::forecast(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Replicate(a) => commands::replicate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
