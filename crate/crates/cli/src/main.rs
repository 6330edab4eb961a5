use std::process::ExitCode;

use clap::Parser;
use log::error;

mod commands;

use commands::Cli;

/// Exit status for each error class.
fn exit_code(err: &qst_core::Error) -> u8 {
    use qst_core::Error::*;
    match err {
        Divergence { .. } | NotConverged { .. } => 3,
        Io { .. } => 4,
        Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose {
        "debug"
    } else {
        "info"
    }))
    .format_timestamp(None)
    .init();

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
