//! `so3sym`: gradient checks, Wahba solving, the synthetic representation
//! comparison, dispersion-threshold OOD evaluation and rotation averaging.
//!
//! Exit codes: 0 success, 1 check failure, 2 input error.

mod commands;
mod io;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "so3sym", version, about = "Symmetric-matrix rotation representation toolkit")]
struct Cli {
    /// Seed for every random stream (overrides a config file's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV, SVG and model files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare the analytic solution Jacobian with finite differences.
    GradCheck(commands::grad_check::Args),
    /// Solve a Wahba problem from a correspondence CSV or synthetic data.
    Wahba(commands::wahba::Args),
    /// Train the representation heads on synthetic data.
    Train(commands::train::Args),
    /// Dispersion-threshold OOD evaluation of a trained `A` model.
    DtEval(commands::dt_eval::Args),
    /// Average quaternions from a CSV file.
    Avg(commands::avg::Args),
}

pub struct Globals {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Result of a subcommand that ran to completion.
pub enum Status {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    let globals = Globals { seed: cli.seed, out: cli.out };
    let result = match cli.command {
        Command::GradCheck(a) => commands::grad_check::run(&globals, a),
        Command::Wahba(a) => commands::wahba::run(&globals, a),
        Command::Train(a) => commands::train::run(&globals, a),
        Command::DtEval(a) => commands::dt_eval::run(&globals, a),
        Command::Avg(a) => commands::avg::run(&globals, a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
