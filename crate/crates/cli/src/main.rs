//! `poincare-lab`: batch driver for the Poincaré-function experiments.
//!
//! Exit codes: 0 success, 2 usage or parameter error, 3 numeric failure,
//! 4 evaluation budget exhausted.

mod args;
mod commands;
mod render;

use args::{Cli, Command};
use clap::{CommandFactory, Parser};
use poincare_lab::Error;
use std::process::ExitCode;

/// Failure of a CLI run.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(Error),
    Io(std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BadParams(_) => CliError::Usage(e.to_string()),
            e => CliError::Numeric(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(Error::BudgetExceeded { .. }) => 4,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn run(cli: Cli) -> CliResult<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let out = &cli.out_dir;
    std::fs::create_dir_all(out)?;
    match &cli.command {
        Command::Poincare(a) => commands::poincare(a, out),
        Command::Siegel(a) => commands::siegel(a, out),
        Command::Preimages(a) => commands::preimages(a, out),
        Command::Exceptional(a) => commands::exceptional(a, out),
        Command::Littlewood(a) => commands::littlewood(a, out),
        Command::Chebyshev(a) => commands::chebyshev(a, out),
        Command::Density(a) => commands::density(a, out),
        Command::Render(a) => render::render(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            match &e {
                CliError::Usage(msg) => {
                    eprintln!("error: {msg}");
                    eprintln!("{}", Cli::command().render_usage());
                }
                CliError::Numeric(err) => eprintln!("error: {err}"),
                CliError::Io(err) => eprintln!("error: Io: {err}"),
            }
            ExitCode::from(code)
        }
    }
}
