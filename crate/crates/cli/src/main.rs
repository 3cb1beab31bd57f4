//! `mrprune`: generate synthetic annotation logs, fit minority-report models,
//! replay pruning policies and evaluate the closed-form pruning error.

mod args;
mod cmd;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Seed used when `--seed` is not given, so bare invocations reproduce.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(name = "mrprune", version, about = "Predict and prune minority reports in repeated crowd annotation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic annotation log with truth sidecars.
    Gen(cmd::gen::GenArgs),
    /// Fit a minority-report model to an annotation log.
    Fit(cmd::fit::FitArgs),
    /// Replay a log under a pruning policy or a grid of policies.
    Prune(cmd::prune::PruneArgs),
    /// Closed-form pruning error, curves, oracles and lemma tables.
    Theory(cmd::theory::TheoryArgs),
    /// Consolidate sweep, evaluation and curve outputs into a report.
    Report(cmd::report::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Gen(a) => cmd::gen::run(a),
        Command::Fit(a) => cmd::fit::run(a),
        Command::Prune(a) => cmd::prune::run(a),
        Command::Theory(a) => cmd::theory::run(a),
        Command::Report(a) => cmd::report::run(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
