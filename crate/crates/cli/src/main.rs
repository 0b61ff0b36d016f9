//! `causelab` command-line front end.
//!
//! Exit codes: 0 on success, 1 when output cannot be written, 2 for usage,
//! parse and input errors, 3 when a method's preconditions fail on the data.

mod args;
mod commands;
mod io;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use args::Cli;

#[derive(Debug)]
pub enum CliError {
    /// Bad flag combination; printed with the subcommand's usage.
    Usage(String),
    /// Unreadable or malformed input files.
    Input(String),
    Output(String),
    Lib(causelab::error::Error),
}

impl From<causelab::error::Error> for CliError {
    fn from(e: causelab::error::Error) -> Self {
        CliError::Lib(e)
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("CAUSELAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("CAUSELAB_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let sub = commands::name(&cli.command);
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            let mut cmd = Cli::command();
            cmd.build();
            let err = match cmd.find_subcommand_mut(sub) {
                Some(s) => s.error(ErrorKind::MissingRequiredArgument, msg),
                None => cmd.error(ErrorKind::MissingRequiredArgument, msg),
            };
            eprint!("{}", err.render());
            ExitCode::from(2)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Output(msg)) => {
            eprintln!("error: cannot write output: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_precondition_failure() { 3 } else { 2 })
        }
    }
}
