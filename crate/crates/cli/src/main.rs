use clap::Parser;
use lesion_risk_cli::commands::{error_document, run, Cli};

fn main() -> std::process::ExitCode {
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_document(&e));
            std::process::ExitCode::FAILURE
        }
    }
}
