//! `localmem` command-line interface.
//!
//! Every subcommand reads a JSON config (`--config`), runs one job and writes
//! a JSON report and/or CSV table to `--out DIR`, or to stdout when no
//! directory is given.
//!
//! Exit codes: 0 success, 1 infeasible calibration, 2 input error,
//! 3 numeric failure.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "localmem", version, about = "Local-MEM Bayesian basket trial design")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// JSON config for the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 uses every core). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Directory for report files; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Posterior analysis of observed responses.
    Analyze,
    /// Go/no-go decisions for a trial snapshot at the interim or final look.
    Monitor,
    /// Operating characteristics by simulation.
    Simulate,
    /// Grid search for the boundary (λ, γ) under an FWER target.
    Calibrate,
    /// Simon two-stage designs.
    Simon(SimonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimonArgs {
    /// Uninteresting response rate.
    #[arg(long)]
    pub p0: Option<f64>,
    /// Target response rate.
    #[arg(long)]
    pub p1: Option<f64>,
    /// Per-basket type-I level; defaults to `fwer / baskets`.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Family-wise error target [default: 0.10].
    #[arg(long)]
    pub fwer: Option<f64>,
    /// Per-basket power [default: 0.8].
    #[arg(long)]
    pub power: Option<f64>,
    /// Number of independent baskets [default: 1].
    #[arg(long)]
    pub baskets: Option<usize>,
    /// Largest total sample size searched [default: 55].
    #[arg(long)]
    pub n_max: Option<u32>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
