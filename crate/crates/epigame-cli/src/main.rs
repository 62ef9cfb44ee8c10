//! Batch front-end for the epigame library. Subcommands read a strict
//! `key = value` configuration, write CSV with `#` metadata lines, and
//! exit 0 on success, 1 on a failed numeric property, 2 on a config
//! problem, 3 on solver or simulation failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or precondition; exit code 2.
    Config(String),
    /// Solver, generation, or I/O failure at run time; exit code 3.
    Run(String),
}

/// How a command that produced output ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// A numeric property the output documents did not hold; exit 1.
    PropertyFailure,
    /// The solver gave up; diagnostics are still written. Exit 3.
    SolverFailure,
}

/// Library errors split into "the input was wrong" and "the computation
/// failed", matching the exit-code contract.
pub(crate) fn map_lib(e: epigame::Error) -> CliError {
    match &e {
        epigame::Error::NoConvergence(_) | epigame::Error::Generation(_) => {
            CliError::Run(e.to_string())
        }
        _ => CliError::Config(e.to_string()),
    }
}

/// Strategic curing-rate analysis for SIS epidemics on heterogeneous networks.
#[derive(Parser)]
#[command(name = "epigame", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary epidemic state for a fixed curing profile
    Endemic(CommonArgs),
    /// Equilibrium curing rates across degree classes, with certification
    Equilibrium(CommonArgs),
    /// Closed-form curing and cost sweep on degree-regular networks
    Regular(CommonArgs),
    /// Event-driven stochastic runs compared to the mean-field state
    Simulate(CommonArgs),
    /// Numeric property checks: weighting shape, monotonicity, floors
    Check(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file
    #[arg(long)]
    config: PathBuf,
    /// Write results here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report progress details on stderr
    #[arg(long)]
    verbose: bool,
}

type Runner = fn(&RunConfig, bool) -> Result<(String, Outcome), CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, runner): (&CommonArgs, Runner) = match &cli.command {
        Command::Endemic(a) => (a, commands::endemic),
        Command::Equilibrium(a) => (a, commands::equilibrium),
        Command::Regular(a) => (a, commands::regular_sweep),
        Command::Simulate(a) => (a, commands::simulate),
        Command::Check(a) => (a, commands::check),
    };
    match run(args, runner) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::PropertyFailure) => {
            eprintln!("a numeric property failed; see the output rows");
            ExitCode::from(1)
        }
        Ok(Outcome::SolverFailure) => {
            eprintln!("the solver did not converge; diagnostics were written");
            ExitCode::from(3)
        }
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(args: &CommonArgs, runner: Runner) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("reading {}: {e}", args.config.display())))?;
    let cfg = RunConfig::parse(&text)?;
    let (out_text, outcome) = runner(&cfg, args.verbose)?;
    output::emit(args.out.as_deref(), &out_text)
        .map_err(|e| CliError::Run(format!("writing output: {e}")))?;
    Ok(outcome)
}
