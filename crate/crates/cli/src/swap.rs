use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::Result;
use blanc::corruption::{swap_experiment, CorruptionError, SwapConfig, SwapTrial};
use clap::Args;
use serde::Serialize;

use crate::io::{self, SWAP_SCHEMA, SWAP_SUMMARY_SCHEMA};
use crate::score::ScoringOpts;
use crate::Outcome;

#[derive(Debug, Args)]
pub struct SwapArgs {
    /// JSONL file of {id, document, summary} records.
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated gaps; more than one adds a sum-of-squares row.
    #[arg(long, default_value = "2,6")]
    pub gaps: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub opts: ScoringOpts,
    /// Trials JSONL path (default stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Summary CSV path (default stderr).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrialRecord<'a> {
    schema: &'static str,
    #[serde(flatten)]
    trial: &'a SwapTrial,
}

#[derive(Serialize)]
struct SkipRecord<'a> {
    schema: &'static str,
    pair_id: &'a str,
    skipped: &'a str,
}

pub fn run(args: &SwapArgs) -> Result<Outcome> {
    let gaps = io::parse_list(&args.gaps)?;
    let policies = gaps.iter().map(|&g| args.opts.policy(g)).collect::<Result<Vec<_>>>()?;
    let lines = io::read_pairs(&args.input)?;
    let mut outcome = Outcome::Clean;
    if io::report_invalid(&lines, &args.input) > 0 {
        outcome = Outcome::Partial;
    }
    let pairs = io::pairs_only(&lines);
    let backend = args.opts.open_backend()?;
    let config = SwapConfig {
        policies: &policies,
        variant: args.opts.variant,
        seed: args.seed,
        parallelism: args.opts.parallelism,
    };
    let report = swap_experiment(&pairs, &config, backend.as_ref())?;

    let trials: HashMap<&str, &SwapTrial> = report.trials.iter().map(|t| (t.pair_id.as_str(), t)).collect();
    let skipped: HashMap<&str, &str> = report
        .skipped
        .iter()
        .map(|(id, reason)| (id.as_str(), reason.as_str()))
        .collect();
    let no_entity = CorruptionError::NoSwappableEntity.to_string();

    let mut out = io::output(args.output.as_ref())?;
    for pair in &pairs {
        if let Some(trial) = trials.get(pair.id.as_str()) {
            io::write_jsonl(
                &mut out,
                &TrialRecord {
                    schema: SWAP_SCHEMA,
                    trial,
                },
            )?;
        } else if let Some(reason) = skipped.get(pair.id.as_str()) {
            if *reason != no_entity {
                outcome = Outcome::Partial;
            }
            io::write_jsonl(
                &mut out,
                &SkipRecord {
                    schema: SWAP_SCHEMA,
                    pair_id: &pair.id,
                    skipped: reason,
                },
            )?;
        }
    }
    out.flush()?;

    let mut side = io::side_output(args.summary.as_ref())?;
    let mut csv = io::csv_writer(&mut side, SWAP_SUMMARY_SCHEMA)?;
    csv.write_record(["gap", "n_trials", "frac_decreased", "frac_increased", "frac_unchanged"])?;
    for s in &report.summaries {
        csv.write_record([
            s.label.clone(),
            s.n_trials.to_string(),
            s.frac_decreased.to_string(),
            s.frac_increased.to_string(),
            s.frac_unchanged.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(outcome)
}
