use std::path::PathBuf;

use anyhow::Result;
use blanc::analysis::{spearman, Quality};
use blanc::score_batch;
use clap::Args;

use crate::io::{self, SWEEP_SCHEMA};
use crate::score::ScoringOpts;
use crate::Outcome;

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSONL file of {id, document, summary} records.
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated gaps to score.
    #[arg(long, default_value = "1,2,3,4,5,6,7,8")]
    pub gaps: String,
    /// Comma-separated mask widths to score.
    #[arg(long, default_value = "1")]
    pub mask_widths: String,
    /// Annotation CSV; adds Spearman correlation with mean overall ratings.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[command(flatten)]
    pub opts: ScoringOpts,
    /// Output CSV path (default stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: &SweepArgs) -> Result<Outcome> {
    let gaps = io::parse_list(&args.gaps)?;
    let widths = io::parse_list(&args.mask_widths)?;
    let lines = io::read_pairs(&args.input)?;
    let mut outcome = Outcome::Clean;
    if io::report_invalid(&lines, &args.input) > 0 {
        outcome = Outcome::Partial;
    }
    let pairs = io::pairs_only(&lines);
    let human = match &args.annotations {
        Some(path) => Some(io::read_annotations(path)?.mean_scores(Quality::Overall)),
        None => None,
    };
    let backend = args.opts.open_backend()?;

    let mut out = io::output(args.output.as_ref())?;
    let mut csv = io::csv_writer(&mut out, SWEEP_SCHEMA)?;
    csv.write_record([
        "gap",
        "mask_width",
        "n_pairs",
        "n_failed",
        "mean_score",
        "spearman_rho",
        "spearman_p",
    ])?;
    for &width in &widths {
        for &gap in &gaps {
            let policy = args.opts.policy_with_width(gap, width)?;
            let results = score_batch(
                &pairs,
                &policy,
                args.opts.variant,
                backend.as_ref(),
                args.opts.parallelism,
            )?;
            let mut scored = Vec::new();
            for (id, r) in &results {
                match r {
                    Ok(r) => scored.push((id.as_str(), r.score)),
                    Err(e) => {
                        eprintln!("gap {gap} width {width}: pair {id}: {e}");
                        outcome = Outcome::Partial;
                    }
                }
            }
            let mean = (!scored.is_empty()).then(|| scored.iter().map(|(_, s)| s).sum::<f64>() / scored.len() as f64);
            let corr = human.as_ref().and_then(|human| {
                let (xs, ys): (Vec<f64>, Vec<f64>) = scored
                    .iter()
                    .filter_map(|(id, s)| human.get(*id).map(|h| (*s, *h)))
                    .unzip();
                spearman(&xs, &ys).ok()
            });
            csv.write_record([
                gap.to_string(),
                width.to_string(),
                scored.len().to_string(),
                (results.len() - scored.len()).to_string(),
                io::opt_num(mean),
                io::opt_num(corr.map(|c| c.coefficient)),
                io::opt_num(corr.map(|c| c.p_value)),
            ])?;
        }
    }
    csv.flush()?;
    Ok(outcome)
}
