mod args;
mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};
use thiserror::Error;

use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

fn parse(argv: Vec<OsString>) -> Result<Cli, CliError> {
    let matches = match Cli::command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => return Err(clap_error(e)),
    };
    let cli = Cli::from_arg_matches(&matches).map_err(clap_error)?;
    let Some(path) = &cli.config else { return Ok(cli) };
    let extra = config::extra_args(&config::read(path)?, &matches)?;
    if extra.is_empty() {
        return Ok(cli);
    }
    let merged: Vec<OsString> = argv.into_iter().chain(extra).collect();
    let matches = Cli::command().try_get_matches_from(merged).map_err(clap_error)?;
    Cli::from_arg_matches(&matches).map_err(clap_error)
}

/// Help and version print and exit 0 here; other clap errors are usage errors.
fn clap_error(e: clap::Error) -> CliError {
    if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
        let _ = e.print();
        std::process::exit(0);
    }
    CliError::Usage(e.render().to_string().trim_end().to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let print = |s: String| println!("{s}");
    match &cli.command {
        Command::Convert(a) => commands::convert(a).map(print),
        Command::Geolocate(a) => commands::geolocate(a).map(print),
        Command::Project(a) => commands::project(a).map(print),
        Command::Simlog(a) => commands::simlog(a),
        Command::Accuracy(a) => {
            let env = std::env::var(commands::SEED_ENV).ok();
            let seed = commands::effective_seed(a.seed, env.as_deref())?;
            commands::accuracy(a, seed).map(print)
        }
        Command::Serve(a) => commands::serve(a),
        Command::Replay(a) => commands::replay(a),
    }
}

fn main() -> ExitCode {
    match parse(std::env::args_os().collect()).and_then(run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("{msg}");
            if !msg.contains("--help") {
                eprintln!("hint: run `aerotag --help` for usage");
            }
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
