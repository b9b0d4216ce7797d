use std::process::ExitCode;

use clap::Parser;
use iqmon_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iqmon: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
