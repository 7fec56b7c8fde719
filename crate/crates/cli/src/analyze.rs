use std::path::PathBuf;

use anyhow::Result;
use blanc::analysis::{
    error_correlation, outperform, split_correlation_analysis_with, Quality, DEFAULT_ALPHA, DEFAULT_SMALL_GROUP,
};
use clap::Args;

use crate::io::{self, ERROR_CORR_SCHEMA, SPLITS_SCHEMA, SPLIT_SUMMARY_SCHEMA};
use crate::Outcome;

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Annotation CSV with header pair_id,annotator_id,quality,score.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Score JSONL written by `blanc score`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Quality to analyze.
    #[arg(long, default_value = "overall")]
    pub quality: Quality,
    /// Size of the small annotator group.
    #[arg(long, default_value_t = DEFAULT_SMALL_GROUP)]
    pub small_group: usize,
    /// Significance level below which a correlation counts.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Per-split CSV path (default stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Summary CSV path (default stderr).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

pub fn run(args: &AnalyzeArgs) -> Result<Outcome> {
    let annotations = io::read_annotations(&args.annotations)?;
    let scores = io::read_scores(&args.scores)?;
    let records = split_correlation_analysis_with(&annotations, &scores, args.quality, args.small_group)?;

    let mut out = io::output(args.output.as_ref())?;
    let mut csv = io::csv_writer(&mut out, SPLITS_SCHEMA)?;
    csv.write_record([
        "split_id",
        "members",
        "human_human_rho",
        "human_human_p",
        "blanc_human_rho",
        "blanc_human_p",
    ])?;
    for r in &records {
        csv.write_record([
            r.split_id.to_string(),
            r.small.join(";"),
            io::opt_num(r.human_human.map(|c| c.coefficient)),
            io::opt_num(r.human_human.map(|c| c.p_value)),
            io::opt_num(r.metric_human.map(|c| c.coefficient)),
            io::opt_num(r.metric_human.map(|c| c.p_value)),
        ])?;
    }
    csv.flush()?;
    drop(csv);
    out.flush()?;

    let result = outperform(&records, args.alpha);
    let mut side = io::side_output(args.summary.as_ref())?;
    let mut csv = io::csv_writer(&mut side, SPLIT_SUMMARY_SCHEMA)?;
    csv.write_record([
        "quality",
        "n_annotators",
        "n_splits",
        "wins",
        "compared",
        "outperform_fraction",
    ])?;
    let n_annotators = annotations.annotators(args.quality).len();
    csv.write_record([
        args.quality.to_string(),
        n_annotators.to_string(),
        records.len().to_string(),
        result.as_ref().map(|o| o.wins.to_string()).unwrap_or_default(),
        result.as_ref().map(|o| o.compared.to_string()).unwrap_or_default(),
        io::opt_num(result.as_ref().ok().map(|o| o.fraction)),
    ])?;
    csv.flush()?;
    if let Err(e) = result {
        eprintln!("outperform fraction undefined: {e}");
    }
    Ok(Outcome::Clean)
}

#[derive(Debug, Args)]
pub struct ErrorCorrArgs {
    /// Score JSONL written by `blanc score`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Error CSV with header pair_id,annotator_id,error_type[,span_start,span_end].
    #[arg(long)]
    pub errors: PathBuf,
    /// Output CSV path (default stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run_error_corr(args: &ErrorCorrArgs) -> Result<Outcome> {
    let scores = io::read_scores(&args.scores)?;
    let errors = io::read_errors(&args.errors)?;
    let (s, p) = error_correlation(&scores, &errors)?;
    let mut out = io::output(args.output.as_ref())?;
    let mut csv = io::csv_writer(&mut out, ERROR_CORR_SCHEMA)?;
    csv.write_record(["method", "coefficient", "p_value", "n"])?;
    for (name, c) in [("spearman", s), ("pearson", p)] {
        csv.write_record([
            name.to_string(),
            c.coefficient.to_string(),
            c.p_value.to_string(),
            c.n.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(Outcome::Clean)
}
