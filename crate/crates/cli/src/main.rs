use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match cohortshap_cli::run(cohortshap_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
