//! Config-driven experiment runner for `marv`.
//!
//! Every output starts with a JSON header echoing the resolved config, which
//! is enough to reproduce the run. CSV files carry it as a leading `# ` line.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use config::{ExperimentConfig, Format};

/// Exit status for config and validation failures.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status for failures after validation passed.
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("assumption violation: {0}")]
    Assumption(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Runtime(_) => EXIT_RUNTIME,
            _ => EXIT_CONFIG,
        }
    }
}

impl From<marv::Error> for CliError {
    fn from(e: marv::Error) -> Self {
        match e {
            marv::Error::AssumptionViolation(m) => Self::Assumption(m),
            other => Self::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "marv",
    version,
    about = "Heavy-tailed moving-average experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set run.n=1000` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Worker thread cap; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; stdout when absent from both flags and config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate replicates and write them as sparse records.
    Simulate,
    /// Evaluate the limit measure of every row.
    Limits,
    /// Compare empirical tail measures with their limits over the t grid.
    Verify,
    /// Hill estimate from a simulate output file or a fresh in-memory simulation.
    Hill {
        /// Sample file written by `simulate`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Number of upper order statistics; overrides `run.k`.
        #[arg(long)]
        k: Option<usize>,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = config::load(cli.common.config.as_deref(), &cli.common.overrides)?;
    if let Some(out) = &cli.common.out {
        cfg.output.path = Some(out.clone());
    }
    if let Some(f) = cli.common.format {
        cfg.output.format = f;
    }
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Limits => commands::limits(&cfg),
        Command::Verify => commands::verify(&cfg),
        Command::Hill { input, k } => {
            if let Some(k) = k {
                cfg.run.k = Some(k);
            }
            commands::hill(&cfg, input.as_deref())
        }
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("marv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
