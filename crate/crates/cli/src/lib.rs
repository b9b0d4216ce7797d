//! Reproducible experiments on top of `iqmon`: fleet simulation with drill
//! reports, accuracy evaluation against the retained stream, and timing.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use clap::{Parser, Subcommand};

pub use config::{Experiment, FileConfig, Mode, Overrides};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "iqmon", version, about = "Incremental quantile monitoring experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Overrides,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Run the agent fleet; write the record log and drill reports.
    Simulate,
    /// Score the pooled summary against the retained raw stream.
    Eval,
    /// Time the sketch over the configured size ladder.
    Bench,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let exp = Experiment::from_cli(&cli.flags)?;
    match cli.command {
        Command::Simulate => commands::simulate(&exp).map(drop),
        Command::Eval => commands::eval(&exp).map(drop),
        Command::Bench => commands::bench(&exp).map(drop),
    }
}
