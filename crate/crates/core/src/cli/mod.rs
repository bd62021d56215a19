//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O error.

mod args;
mod commands;

use std::ffi::OsString;
use std::fmt;
use std::process::ExitCode;

use clap::Parser;

pub use args::{Cli, Command, Common, Format};

use crate::error::QbsdError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<QbsdError> for CliError {
    fn from(e: QbsdError) -> Self {
        match e {
            QbsdError::Config(_)
            | QbsdError::InvalidScheme(_)
            | QbsdError::InvalidConstant(_)
            | QbsdError::InvalidWindow(_)
            | QbsdError::InvalidGranularity { .. } => CliError::config(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Parse `std::env::args`, run, and report errors on stderr.
pub fn run() -> ExitCode {
    run_with(std::env::args_os())
}

pub fn run_with<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if e.code != 0 {
                eprintln!("error: {}", e.message.trim_end());
            } else {
                print!("{}", e.message);
            }
            return ExitCode::from(e.code);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn clap_error(e: clap::Error) -> CliError {
    let code = if e.use_stderr() { 1 } else { 0 };
    let message = e.render().to_string();
    let message = message.strip_prefix("error: ").unwrap_or(&message).to_owned();
    CliError { code, message }
}

/// Parse the command line, splicing in `--config` file entries ahead of the
/// explicit flags so the latter win.
pub fn parse(argv: Vec<OsString>) -> CliResult<Cli> {
    let first = Cli::try_parse_from(&argv).map_err(clap_error)?;
    let Some(path) = first.command.common().config.clone() else {
        return Ok(first);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let extra = args::config_file_args(&text).map_err(|m| CliError::config(format!("{}: {m}", path.display())))?;
    let at = argv
        .iter()
        .position(|a| Command::NAMES.iter().any(|n| a == n))
        .map_or(argv.len(), |i| i + 1);
    let mut merged = argv[..at].to_vec();
    merged.extend(extra.into_iter().map(OsString::from));
    merged.extend_from_slice(&argv[at..]);
    Cli::try_parse_from(merged).map_err(clap_error)
}
