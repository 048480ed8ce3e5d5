mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] washout_core::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Certified / all checks passed.
    Success,
    /// Infeasible or a check failed.
    Negative,
}

#[derive(Debug, Parser)]
#[command(
    name = "washout",
    version,
    about = "Washout controller synthesis for aperiodic sampled-data loops"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: `out`, or `out` from the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random sampling schedules.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid points for certificate checks.
    #[arg(long, global = true)]
    grid: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a controller and certify it.
    Synth,
    /// Largest feasible T2 per degree.
    Sweep,
    /// Simulate the closed loop.
    Simulate,
    /// Re-run the checks on a stored synth result.
    Verify,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let cfg = config::RunConfig::load(&path)?;
    let out = cli
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(|e| CliError::Io(out.clone(), e))?;
    let ctx = commands::Context {
        cfg,
        out,
        seed: cli.seed,
        grid: cli.grid.unwrap_or(washout_core::verification::DEFAULT_GRID),
    };
    match cli.command {
        Command::Synth => commands::synth(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Verify => commands::verify(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
