use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = ckm_cli::Cli::parse();
    match ckm_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
