use std::path::PathBuf;

use anyhow::{bail, Result};
use blanc::{score_batch, MaskedLm, MaskingPolicy, PairInput, ScoreVariant};
use clap::Args;
use serde::Serialize;

use crate::io::{self, PairLine, SCORE_SCHEMA};
use crate::{backend, Outcome};

/// Masking, variant and backend flags shared by the scoring commands.
#[derive(Debug, Clone, Args)]
pub struct ScoringOpts {
    /// Score variant: accuracy, logit, probability or log_probability.
    #[arg(long, default_value = "accuracy")]
    pub variant: ScoreVariant,
    /// Whole words shorter than this are never masked.
    #[arg(long, default_value_t = 4)]
    pub min_word_len: usize,
    /// Word-start pieces shorter than this are never masked.
    #[arg(long, default_value_t = 0)]
    pub min_start_len: usize,
    /// Number of consecutive eligible tokens masked together.
    #[arg(long, default_value_t = 1)]
    pub mask_width: usize,
    /// Bundle directory, or `reference` for the built-in frequency model.
    #[arg(long, env = backend::BUNDLE_ENV, default_value = "reference")]
    pub backend: String,
    /// Maximum inputs per model call (bundle backends only).
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Worker threads for scoring pairs.
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
}

impl ScoringOpts {
    pub fn policy(&self, gap: usize) -> Result<MaskingPolicy> {
        let policy = MaskingPolicy {
            gap,
            min_word_len: self.min_word_len,
            min_start_len: self.min_start_len,
            mask_width: self.mask_width,
            ..MaskingPolicy::default()
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn policy_with_width(&self, gap: usize, mask_width: usize) -> Result<MaskingPolicy> {
        let policy = MaskingPolicy {
            mask_width,
            ..self.policy(gap)?
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn open_backend(&self) -> Result<Box<dyn MaskedLm>> {
        if self.batch_size == Some(0) {
            bail!("--batch-size must be positive");
        }
        backend::open(&self.backend, self.batch_size)
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// JSONL file of {id, document, summary} records.
    #[arg(long, conflicts_with_all = ["doc", "summary"], required_unless_present_all = ["doc", "summary"])]
    pub input: Option<PathBuf>,
    /// Plain-text document (with --summary).
    #[arg(long, requires = "summary")]
    pub doc: Option<PathBuf>,
    /// Plain-text summary (with --doc).
    #[arg(long, requires = "doc")]
    pub summary: Option<PathBuf>,
    /// Pair id used with --doc/--summary.
    #[arg(long, default_value = "pair")]
    pub id: String,
    /// Gap M: each pass masks eligible tokens at every M-th position.
    #[arg(long, default_value_t = 6)]
    pub gap: usize,
    #[command(flatten)]
    pub opts: ScoringOpts,
    /// Output JSONL path (default stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ScoreRecord<'a> {
    schema: &'static str,
    id: &'a str,
    variant: ScoreVariant,
    gap: usize,
    mask_width: usize,
    score: f64,
    n_help: usize,
    n_base: usize,
    n_total: usize,
}

#[derive(Debug, Serialize)]
struct ErrorRecord<'a> {
    schema: &'static str,
    id: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<usize>,
    error: String,
}

pub fn run(args: &ScoreArgs) -> Result<Outcome> {
    let policy = args.opts.policy(args.gap)?;
    let lines = match (&args.input, &args.doc, &args.summary) {
        (Some(path), _, _) => io::read_pairs(path)?,
        (None, Some(doc), Some(summary)) => vec![PairLine::Pair(PairInput::new(
            args.id.clone(),
            io::read_text(doc)?,
            io::read_text(summary)?,
        ))],
        _ => bail!("either --input or both --doc and --summary are required"),
    };
    let backend = args.opts.open_backend()?;
    let pairs = io::pairs_only(&lines);
    let mut results = score_batch(
        &pairs,
        &policy,
        args.opts.variant,
        backend.as_ref(),
        args.opts.parallelism,
    )?
    .into_iter();

    let mut out = io::output(args.output.as_ref())?;
    let mut outcome = Outcome::Clean;
    for entry in &lines {
        match entry {
            PairLine::Pair(pair) => {
                let (_, result) = results.next().expect("one result per pair");
                match result {
                    Ok(r) => io::write_jsonl(
                        &mut out,
                        &ScoreRecord {
                            schema: SCORE_SCHEMA,
                            id: &pair.id,
                            variant: r.variant,
                            gap: policy.gap,
                            mask_width: policy.mask_width,
                            score: r.score,
                            n_help: r.n_help,
                            n_base: r.n_base,
                            n_total: r.n_total,
                        },
                    )?,
                    Err(e) => {
                        outcome = Outcome::Partial;
                        io::write_jsonl(
                            &mut out,
                            &ErrorRecord {
                                schema: SCORE_SCHEMA,
                                id: Some(&pair.id),
                                line: None,
                                error: e.to_string(),
                            },
                        )?
                    }
                }
            }
            PairLine::Invalid { line, id, error } => {
                outcome = Outcome::Partial;
                io::write_jsonl(
                    &mut out,
                    &ErrorRecord {
                        schema: SCORE_SCHEMA,
                        id: id.as_deref(),
                        line: Some(*line),
                        error: error.clone(),
                    },
                )?
            }
        }
    }
    out.flush()?;
    Ok(outcome)
}
