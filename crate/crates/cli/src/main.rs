mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::overlay;
use error::CliError;

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Calibrate(a) => commands::calibrate_cmd(&overlay(a, cfg)?),
        Command::Convert(a) => commands::convert_cmd(&overlay(a, cfg)?),
        Command::Run(a) => commands::run_cmd(&overlay(a, cfg)?),
        Command::Validate(a) => commands::validate_cmd(&overlay(a, cfg)?),
        Command::Analyze(a) => commands::analyze_cmd(&overlay(a, cfg)?),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("tmn: {e}");
            ExitCode::from(e.code)
        }
    }
}
