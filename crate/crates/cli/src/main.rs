mod args;
mod commands;
mod config;
mod pipeline;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};

/// Failure of one invocation. Usage errors exit with 1, everything that goes
/// wrong with the data or configuration exits with 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl From<profiling_core::Error> for CliError {
    fn from(e: profiling_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "error: {m}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    let result = match cli.command {
        Command::Split(a) => commands::split(a),
        Command::Merge(a) => commands::merge(a),
        Command::BuildVocab(a) => commands::build_vocab(a),
        Command::TrainGru(a) => commands::train_gru(a),
        Command::Predict(a) => commands::predict(a),
        Command::ValidatePreds(a) => commands::validate_preds(a),
        Command::Aggregate(a) => commands::aggregate(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Ensemble(a) => commands::ensemble(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Pipeline(a) => pipeline::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
