//! `blanc`: score summaries against their documents, sweep masking
//! parameters, compare with human annotators and run entity-swap trials.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod analyze;
mod backend;
mod io;
mod score;
mod swap;
mod sweep;

/// Exit status of a command that did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    /// Some records could not be processed; see the output.
    Partial,
}

#[derive(Debug, Parser)]
#[command(name = "blanc", version, about = "Reference-free summary scoring with BLANC-help")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score document/summary pairs.
    Score(score::ScoreArgs),
    /// Mean score (and optional human correlation) per gap and mask width.
    Sweep(sweep::SweepArgs),
    /// Compare metric-human and human-human correlation over annotator splits.
    Analyze(analyze::AnalyzeArgs),
    /// Correlate scores with the number of annotators reporting factual errors.
    ErrorCorr(analyze::ErrorCorrArgs),
    /// Swap one entity per summary and record how the score moves.
    SwapSim(swap::SwapArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Score(a) => score::run(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Analyze(a) => analyze::run(a),
        Command::ErrorCorr(a) => analyze::run_error_corr(a),
        Command::SwapSim(a) => swap::run(a),
    };
    match result {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
