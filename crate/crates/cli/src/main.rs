use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = sqclock_cli::Cli::parse();
    match sqclock_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
