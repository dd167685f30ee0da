use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = kdloc::cli::Cli::parse();
    match kdloc::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
