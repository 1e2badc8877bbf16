//! Configuration-driven front end for the `dragon` binary.
//!
//! Each subcommand reads a JSON configuration and writes CSV or JSON
//! output atomically. Exit codes: 0 success, 2 configuration error,
//! 3 numeric divergence, 4 I/O failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dragon_core::Backend;

pub use commands::RunContext;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "dragon",
    version,
    about = "Distributed-order fractional dynamics on graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a multi-term fractional equation (graph diffusion or scalar).
    Solve(CommonArgs),
    /// Simulate the non-Markovian graph walker.
    Walk(WalkArgs),
    /// Measure the observed convergence order over a step ladder.
    Convergence(CommonArgs),
    /// Generate a viscoelastic strain dataset.
    ViscoGen(CommonArgs),
    /// Fit single-order and distributed-order laws to strain data.
    ViscoFit(CommonArgs),
    /// Fit a sequence by a combination of power-law waiting laws.
    FitWait(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file (overrides `out` in the configuration).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random seed (overrides `seed` in the configuration).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Solver backend: strategy1, gl or abm.
    #[arg(long)]
    pub backend: Option<Backend>,
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also solve the diffusion equation and report the TV distance.
    #[arg(long)]
    pub compare: bool,
}

fn context(args: &CommonArgs, compare: bool) -> RunContext {
    let base_dir = match args.config.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => Path::new(".").to_path_buf(),
    };
    RunContext {
        base_dir,
        out: args.out.clone(),
        seed: args.seed,
        backend: args.backend,
        compare,
    }
}

fn read_config(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Runs one parsed command line and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    match &cli.command {
        Command::Solve(a) => {
            commands::solve(config::parse(&read_config(&a.config)?)?, &context(a, false))
        }
        Command::Walk(w) => commands::walk(
            config::parse(&read_config(&w.common.config)?)?,
            &context(&w.common, w.compare),
        ),
        Command::Convergence(a) => {
            commands::convergence(config::parse(&read_config(&a.config)?)?, &context(a, false))
        }
        Command::ViscoGen(a) => {
            commands::visco_gen(config::parse(&read_config(&a.config)?)?, &context(a, false))
        }
        Command::ViscoFit(a) => {
            commands::visco_fit(config::parse(&read_config(&a.config)?)?, &context(a, false))
        }
        Command::FitWait(a) => {
            commands::fit_wait(config::parse(&read_config(&a.config)?)?, &context(a, false))
        }
    }
}

/// Sizes the global thread pool from `DRAGON_THREADS` (unset or 0: automatic).
pub fn init_threads(var: Option<&str>) -> Result<(), CliError> {
    let n = match var {
        None => return Ok(()),
        Some(s) => s.trim().parse::<usize>().map_err(|_| {
            CliError::Config(format!(
                "DRAGON_THREADS must be a non-negative integer, got {s:?}"
            ))
        })?,
    };
    if n == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}
