mod commands;
mod config;
mod plots;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Flags};

/// Spatial search by continuous-time quantum walks on crystal lattices with
/// Dirac points.
#[derive(Parser)]
#[command(name = "diracwalk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Band structure on the l^d momentum grid (bands.csv).
    Bands,
    /// Dirac points, the five assumptions and a connectivity check (dirac.json).
    Dirac,
    /// Lattice sums over a ladder of sizes and their l -> ∞ limits.
    Integrals,
    /// Predict the run time, evolve every starting state and record traces.
    Simulate,
    /// Run the invariant suite; exits with 1 if any check fails.
    Verify,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(diracwalk::Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Core(e) => e.fmt(f),
            CliError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<diracwalk::Error> for CliError {
    fn from(e: diracwalk::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let cfg = ExperimentConfig::load(&cli.flags)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Bands => commands::bands(&cfg)?,
        Command::Dirac => commands::dirac(&cfg)?,
        Command::Integrals => commands::integrals(&cfg)?,
        Command::Simulate => commands::simulate(&cfg)?,
        Command::Verify => return commands::verify(&cfg),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
