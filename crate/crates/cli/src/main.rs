//! `resdens`: residual density estimation, kernel certification, bandwidth
//! validation and rate experiments from the command line.

mod commands;
mod outcome;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use outcome::CommandResult;

#[derive(Parser, Debug)]
#[command(name = "resdens", version, about = "Density estimation of regression errors")]
struct Cli {
    /// Seed for simulated draws; overrides the seed of a rate config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory for written artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the error density from a CSV of covariates and responses.
    Estimate(EstimateArgs),
    /// Certify the integral and smoothness conditions of a kernel pair.
    KernelCheck(KernelCheckArgs),
    /// Run a rate experiment described by a config file.
    Rates(RatesArgs),
    /// Check power-law bandwidth exponents against the rate conditions.
    ValidateBandwidths(BandwidthArgs),
    /// Draw a sample from a data-generating process and write it as CSV.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Input CSV with columns x1..xd, y.
    #[arg(long)]
    pub input: PathBuf,
    /// Regression bandwidth.
    #[arg(long)]
    pub b0: f64,
    /// Density bandwidth.
    #[arg(long)]
    pub b1: f64,
    /// Lower trim corner: one value, or one per coordinate separated by commas.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub trim_lo: Option<Vec<f64>>,
    /// Upper trim corner, same format as --trim-lo.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub trim_hi: Option<Vec<f64>>,
    /// Left end of the evaluation grid.
    #[arg(long, allow_negative_numbers = true)]
    pub grid_lo: Option<f64>,
    /// Right end of the evaluation grid.
    #[arg(long, allow_negative_numbers = true)]
    pub grid_hi: Option<f64>,
    /// Minimum number of grid points; more are used if needed to keep the step at most b1/20.
    #[arg(long, default_value_t = resdens::density::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    /// Density kernel.
    #[arg(long, default_value = "quadweight")]
    pub kernel: String,
}

#[derive(Args, Debug)]
pub struct KernelCheckArgs {
    /// Density kernel to certify (quadweight or triweight).
    #[arg(long, default_value = "quadweight")]
    pub kernel: String,
    /// Absolute tolerance for the integral conditions.
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Dimension of the regression kernel.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
}

#[derive(Args, Debug)]
pub struct RatesArgs {
    /// Experiment config (TOML, or JSON when the file starts with '{').
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Args, Debug)]
pub struct BandwidthArgs {
    /// Covariate dimension.
    #[arg(long)]
    pub d: usize,
    /// Exponent of the regression bandwidth b0 = c0 n^-a.
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    /// Exponent of the density bandwidth b1 = c1 n^-gamma.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.2)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Sample size.
    #[arg(long)]
    pub n: usize,
    /// Data-generating process config; the default process when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn run(cli: Cli) -> CommandResult {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return CommandResult::usage("--workers must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            return CommandResult::runtime(format!("cannot start worker pool: {e}"));
        }
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Estimate(args) => commands::estimate(args, out),
        Command::KernelCheck(args) => commands::kernel_check(args, out),
        Command::Rates(args) => commands::rates(args, cli.seed, out),
        Command::ValidateBandwidths(args) => commands::validate_bandwidths(args, out),
        Command::Simulate(args) => commands::simulate(args, cli.seed, out),
    }
}

fn main() -> ExitCode {
    let result = run(Cli::parse());
    result.print();
    ExitCode::from(result.code())
}
