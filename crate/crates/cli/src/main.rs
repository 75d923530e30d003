//! `lieflow`: ensemble steering, classification training, property suites
//! and approximation ladders from scenario files.
//!
//! Exit codes: 0 success, 1 numeric non-convergence, 2 usage or config error.

mod artifacts;
mod commands;
mod error;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lieflow::ExecMode;

use crate::error::{CliError, CliResult};
use crate::scenario::{load, ApproxScenario, SteerScenario, TrainScenario};

#[derive(Parser)]
#[command(name = "lieflow", version, about = "Ensemble control on manifolds")]
struct Cli {
    /// Scenario file (.json or .toml).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Overrides the scenario seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads for the data-parallel loops.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steer an ensemble to targets by gradient descent on the control schedule.
    Steer,
    /// Train a classifier through the product construction.
    Train,
    /// Run a property suite: geometry, fields, approximation, dynamics or all.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
    /// Run a truncation ladder for one of the series expansions.
    Approx,
}

fn exec_mode(threads: Option<usize>) -> CliResult<ExecMode> {
    if threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
        }
        Ok(ExecMode::Parallel)
    }
    #[cfg(not(feature = "parallel"))]
    Ok(ExecMode::Sequential)
}

fn config_path(cli: &Cli) -> CliResult<&Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| CliError::Config("this command needs --config PATH".into()))
}

fn run(cli: &Cli) -> CliResult<commands::Report> {
    let exec = exec_mode(cli.threads)?;
    match &cli.command {
        Command::Steer => {
            let s: SteerScenario = load(config_path(cli)?, cli.seed)?;
            commands::steer(&s, exec, &cli.out)
        }
        Command::Train => {
            let s: TrainScenario = load(config_path(cli)?, cli.seed)?;
            commands::train(&s, exec, &cli.out)
        }
        Command::Approx => {
            let s: ApproxScenario = load(config_path(cli)?, cli.seed)?;
            commands::approx(&s, exec, &cli.out)
        }
        Command::Verify { suite } => commands::verify(suite, exec, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            println!("{}", report.message);
            if report.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
