//! `cda`: experiments on the unit-quantity continuous double auction.

mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::json;

use config::{CommandKind, Flags};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "cda", version = output::VERSION, about = "Continuous double auction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Low-traffic transition matrix and its invariant distribution
    Chain(Flags),
    /// Equilibrium trade-price frequencies against the low-traffic distribution
    Simulate(Flags),
    /// First-passage times to 1 or N, with the Gamma-mixture comparison for n = 1
    Fpt(Flags),
    /// Mean first-passage times over a grid of (N, n, rho)
    Sweep(Flags),
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    let (kind, flags) = match cli.command {
        Command::Chain(f) => (CommandKind::Chain, f),
        Command::Simulate(f) => (CommandKind::Simulate, f),
        Command::Fpt(f) => (CommandKind::Fpt, f),
        Command::Sweep(f) => (CommandKind::Sweep, f),
    };
    let cfg = config::resolve(kind, flags)?;
    let start = Instant::now();
    let outcome = match kind {
        CommandKind::Chain => commands::chain(&cfg)?,
        CommandKind::Simulate => commands::simulate(&cfg)?,
        CommandKind::Fpt => commands::fpt(&cfg)?,
        CommandKind::Sweep => commands::sweep(&cfg)?,
    };
    let files = output::write_outcome(&cfg, &outcome, start.elapsed())?;
    Ok(json!({
        "command": kind.name(),
        "output": cfg.output,
        "files": files,
        "summary": outcome.summary,
    }))
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            _ => return fail(CliError::Usage(e.render().to_string().trim().to_string())),
        },
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}
