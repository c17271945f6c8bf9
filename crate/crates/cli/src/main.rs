mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] renewal_bias::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(renewal_bias::Error::NonIdentifiable)
            | CliError::Core(renewal_bias::Error::Divergent(_)) => 3,
            _ => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, cli.verbose),
        Command::Estimate(a) => commands::estimate(a, cli.verbose),
        Command::Sweep(a) => commands::experiment(a, cli.verbose, commands::Study::Sweep),
        Command::Coverage(a) => commands::experiment(a, cli.verbose, commands::Study::Coverage),
        Command::Classify(a) => commands::classify(a, cli.verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
