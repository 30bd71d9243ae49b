use std::process::ExitCode;

use clap::Parser;
use freqxplain_cli::{run, Cli, Status};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Degenerate) => ExitCode::from(2),
        Ok(Status::Failed) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
