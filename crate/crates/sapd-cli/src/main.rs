//! Batch front-end: dataset generation, experiment execution across solver
//! variants, and trace/summary emission.
//!
//! Verbs: `gen`, `solve`, `compare`, `reference`. Exit codes distinguish
//! configuration (2), data (3), numeric (4) and IO (5) failures.

mod config;
mod runner;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl From<sapd::SolverError> for CliError {
    fn from(e: sapd::SolverError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<sapd::portfolio::DataError> for CliError {
    fn from(e: sapd::portfolio::DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "sapd", about = "Primal-dual solvers for saddle-point problems with concurrent parameter learning", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic returns dataset and instance metadata.
    Gen(GenArgs),
    /// Build an instance, run one solver, write trace and summary.
    Solve(SolveArgs),
    /// Join completed traces into a wide comparison table.
    Compare(CompareArgs),
    /// Compute (and cache) a reference solution for an instance.
    Reference(ReferenceArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    sectors: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Returns CSV destination.
    #[arg(long)]
    out_data: PathBuf,
    /// Instance metadata destination (JSON).
    #[arg(long)]
    out_meta: Option<PathBuf>,
}

#[derive(Args)]
struct OverrideArgs {
    /// JSON configuration file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    sectors: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    eps_psd: Option<f64>,
    #[arg(long)]
    y_cap: Option<f64>,
    #[arg(long)]
    eps_relax: Option<f64>,
    #[arg(long)]
    c_alpha: Option<f64>,
    #[arg(long)]
    c_beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    tau_bar: Option<f64>,
    #[arg(long)]
    gamma0: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Returns CSV for portfolio-csv.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Directory for cached references.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

impl OverrideArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! over {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*
            };
        }
        over!(problem, solver, iters, seed, n, sectors, kappa, v, eps_psd, y_cap, rho, tau_bar, gamma0);
        if self.eps_relax.is_some() {
            cfg.eps_relax = self.eps_relax;
        }
        if self.c_alpha.is_some() {
            cfg.c_alpha = self.c_alpha;
        }
        if self.c_beta.is_some() {
            cfg.c_beta = self.c_beta;
        }
        if self.alpha.is_some() {
            cfg.alpha = self.alpha;
        }
        if self.beta.is_some() {
            cfg.beta = self.beta;
        }
        if let Some(d) = &self.data {
            cfg.data = Some(d.clone());
        }
        if let Some(d) = &self.cache_dir {
            cfg.cache_dir = Some(d.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    overrides: OverrideArgs,
    #[arg(long)]
    out_trace: PathBuf,
    #[arg(long)]
    out_summary: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Labeled traces as label=path, at least two.
    #[arg(required = true, num_args = 2..)]
    traces: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReferenceArgs {
    #[command(flatten)]
    overrides: OverrideArgs,
    /// Reference JSON destination.
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => runner::cmd_gen(&args),
        Command::Solve(args) => runner::cmd_solve(&args),
        Command::Compare(args) => runner::cmd_compare(&args),
        Command::Reference(args) => runner::cmd_reference(&args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}
