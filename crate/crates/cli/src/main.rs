//! `smru`: hybrid echo cancellation and noise suppression from the command line.
//!
//! Every subcommand prints a JSON report on stdout. Failures print a JSON
//! object `{"error", "exit_code", "message"}` on stderr and exit with 2
//! (usage), 3 (unreadable or malformed input) or 4 (numeric failure).

mod bench;
mod error;
mod macs;
mod model;
mod process;
mod simulate;
mod weights;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;

use error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "smru", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cancel echo and noise in a microphone recording.
    Process(process::ProcessArgs),
    /// Generate a synthetic scene as WAV files plus a manifest.
    Simulate(simulate::SimulateArgs),
    /// Measure the streaming real-time factor.
    Bench(bench::BenchArgs),
    /// Report multiply-accumulate counts per module.
    Macs(macs::MacsArgs),
    /// Write a deterministically initialized weight file.
    InitWeights(weights::InitWeightsArgs),
}

/// Writes to stdout; a closed pipe is not an error.
fn print_out(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn emit<T: Serialize>(report: &T) -> Result<()> {
    print_out(&(serde_json::to_string_pretty(report)? + "\n"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Process(args) => emit(&process::run(&args)?),
        Command::Simulate(args) => emit(&simulate::run(&args)?),
        Command::Bench(args) => emit(&bench::run(&args)?),
        Command::Macs(args) => {
            let report = macs::run(&args)?;
            if args.table {
                print_out(&report.table())
            } else {
                emit(&report)
            }
        }
        Command::InitWeights(args) => emit(&weights::run(&args)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}
