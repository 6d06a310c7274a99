//! Command-line front end for the optimal-liquidation library.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 runtime/numerical error.

mod commands;
mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use commands::CliError;
use config::ExperimentConfig;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "execrisk",
    version,
    about = "Optimal liquidation with a dynamic entropic risk adjustment: closed-form policies and their verification suite"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Configuration file (key = value lines, # comments). Defaults apply
    /// when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base RNG seed; path i uses substream i of this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Outputs are identical for any value.
    #[arg(long)]
    workers: Option<usize>,
    /// Monte Carlo path budget.
    #[arg(long)]
    paths: Option<usize>,
    /// Time steps per simulated path.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Riccati coefficients a, b, c, a - gamma, ell and -a on a time grid, per rho.
    Coeffs(CommonOpts),
    /// Normalized scheduled liquidation program per rho.
    Schedule(CommonOpts),
    /// Closed-loop path ensemble: path CSVs plus a summary against the value function.
    Simulate(CommonOpts),
    /// Run the verification suite and exit nonzero on any failing check.
    Verify(CommonOpts),
}

fn load_config(opts: &CommonOpts) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &opts.config {
        Some(path) => ExperimentConfig::from_file(&path.to_string_lossy())?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &opts.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
        cfg.echo.insert("seed".into(), seed.to_string());
    }
    if let Some(workers) = opts.workers {
        cfg.workers = workers;
    }
    if let Some(paths) = opts.paths {
        cfg.paths = paths;
        cfg.echo.insert("paths".into(), paths.to_string());
    }
    if let Some(steps) = opts.steps {
        cfg.steps = steps;
        cfg.echo.insert("steps".into(), steps.to_string());
    }
    // fail fast on inadmissible parameters before any work starts
    cfg.params()?;
    cfg.sweep()?;
    Ok(cfg)
}

fn init_workers(workers: usize) {
    if workers > 0 {
        // ignore failure: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Coeffs(opts) => {
            let cfg = load_config(&opts)?;
            init_workers(cfg.workers);
            commands::coeffs::run(&cfg)
        }
        Command::Schedule(opts) => {
            let cfg = load_config(&opts)?;
            init_workers(cfg.workers);
            commands::schedule::run(&cfg)
        }
        Command::Simulate(opts) => {
            let cfg = load_config(&opts)?;
            init_workers(cfg.workers);
            commands::simulate::run(&cfg)
        }
        Command::Verify(opts) => {
            let cfg = load_config(&opts)?;
            init_workers(cfg.workers);
            commands::verify::run(&cfg)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
