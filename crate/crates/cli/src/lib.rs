//! Batch front end: parse run configurations, run studies, write CSV
//! reports and a run manifest.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{run_command, CommandKind};
pub use config::{RawConfig, RunConfig};

/// Environment variable overriding `run.seed` (the `--seed` flag wins).
pub const SEED_ENV: &str = "CTDR_SEED";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Scenario(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Scenario(_) => 3,
        }
    }
}

impl From<ctdr_core::Error> for CliError {
    fn from(e: ctdr_core::Error) -> Self {
        match e {
            ctdr_core::Error::Config(_) | ctdr_core::Error::InvalidInput(_) => CliError::Config(e.to_string()),
            other => CliError::Scenario(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ctdr",
    version,
    about = "Monte Carlo studies of doubly robust survival estimators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario per sample size and write report.csv.
    Simulate(RunArgs),
    /// Run the four correct/misspecified nuisance cells.
    DrMatrix(RunArgs),
    /// TV-gap, norm-decay and rate-condition studies.
    Diagnose(RunArgs),
    /// Per-replication empirical-process decomposition.
    Decompose(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Master seed, overriding the config and the environment.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    pub fn split(self) -> (CommandKind, RunArgs) {
        match self {
            Command::Simulate(a) => (CommandKind::Simulate, a),
            Command::DrMatrix(a) => (CommandKind::DrMatrix, a),
            Command::Diagnose(a) => (CommandKind::Diagnose, a),
            Command::Decompose(a) => (CommandKind::Decompose, a),
        }
    }
}

/// Resolves the seed override: flag first, then the environment.
pub fn seed_override(flag: Option<u64>, env: Option<&str>) -> Result<Option<u64>, CliError> {
    match (flag, env) {
        (Some(s), _) => Ok(Some(s)),
        (None, Some(v)) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{SEED_ENV}: cannot parse `{v}` as an unsigned integer"))),
        (None, None) => Ok(None),
    }
}

/// Runs one subcommand with its arguments.
pub fn execute(kind: CommandKind, args: &RunArgs, env_seed: Option<&str>) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", args.config.display())))?;
    let raw = RawConfig::parse(&text)?;
    let config = RunConfig::resolve(raw, seed_override(args.seed, env_seed)?)?;
    if args.threads == Some(0) {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker threads: {e}")))?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", args.out.display())))?;
    pool.install(|| run_command(kind, &config, &args.out))
}
