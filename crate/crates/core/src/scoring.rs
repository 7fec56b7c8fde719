//! BLANC-help scoring: accuracy form and the gold-token score variants.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, MaskedLm, PredictionOutcome};
use crate::masking::{build_cloze_pair, mask_positions, MaskingError, MaskingPolicy, ModelInput};
use crate::text_prep::{prepare_document, tokenize};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("no maskable tokens in document under the given policy")]
    NoMaskableTokens,
    #[error(transparent)]
    Masking(#[from] MaskingError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("backend returned {got} outcomes for {expected} masked slots")]
    OutcomeMismatch { expected: usize, got: usize },
    #[error("duplicate pair id `{0}`")]
    DuplicateId(String),
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    /// Difference in top-1 reconstruction accuracy.
    #[default]
    Accuracy,
    /// Mean difference of the gold token's raw logit.
    Logit,
    /// Mean difference of the gold token's softmax probability.
    Probability,
    /// Mean difference of the gold token's log probability.
    LogProbability,
}

impl ScoreVariant {
    pub const ALL: [ScoreVariant; 4] = [
        ScoreVariant::Accuracy,
        ScoreVariant::Logit,
        ScoreVariant::Probability,
        ScoreVariant::LogProbability,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreVariant::Accuracy => "accuracy",
            ScoreVariant::Logit => "logit",
            ScoreVariant::Probability => "probability",
            ScoreVariant::LogProbability => "log_probability",
        }
    }

    fn value(&self, outcome: &PredictionOutcome) -> f64 {
        match self {
            ScoreVariant::Accuracy => f64::from(u8::from(outcome.is_correct())),
            ScoreVariant::Logit => outcome.gold_logit,
            ScoreVariant::Probability => outcome.gold_prob,
            ScoreVariant::LogProbability => outcome.gold_logprob,
        }
    }
}

impl fmt::Display for ScoreVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "accuracy" | "original" => Ok(ScoreVariant::Accuracy),
            "logit" | "logits" => Ok(ScoreVariant::Logit),
            "probability" | "prob" => Ok(ScoreVariant::Probability),
            "log_probability" | "logprob" | "log_prob" => Ok(ScoreVariant::LogProbability),
            other => Err(format!("unknown score variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlancResult {
    pub variant: ScoreVariant,
    pub n_help: usize,
    pub n_base: usize,
    pub n_total: usize,
    pub score: f64,
}

/// Raw per-slot outcomes of one document/summary pair, aligned help/base.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairOutcomes {
    pub help: Vec<PredictionOutcome>,
    pub base: Vec<PredictionOutcome>,
}

impl PairOutcomes {
    pub fn n_total(&self) -> usize {
        self.help.len()
    }

    /// Micro-averaged score over every masked slot of the document.
    pub fn result(&self, variant: ScoreVariant) -> Result<BlancResult, ScoreError> {
        let n_total = self.help.len();
        if n_total == 0 {
            return Err(ScoreError::NoMaskableTokens);
        }
        let n_help = self.help.iter().filter(|o| o.is_correct()).count();
        let n_base = self.base.iter().filter(|o| o.is_correct()).count();
        let score = match variant {
            ScoreVariant::Accuracy => (n_help as f64 - n_base as f64) / n_total as f64,
            _ => {
                let sum: f64 = self
                    .help
                    .iter()
                    .zip(&self.base)
                    .map(|(h, b)| variant.value(h) - variant.value(b))
                    .sum();
                sum / n_total as f64
            }
        };
        Ok(BlancResult {
            variant,
            n_help,
            n_base,
            n_total,
            score,
        })
    }
}

/// Builds every base/help model input for a pair: for each sentence and
/// each offset `1..=gap` with a non-empty mask, a help input followed by
/// its base input.
pub fn cloze_inputs(
    document: &str,
    summary: &str,
    policy: &MaskingPolicy,
    backend: &dyn MaskedLm,
) -> Result<Vec<(ModelInput, ModelInput)>, ScoreError> {
    policy.validate()?;
    let vocab = backend.vocab();
    let specials = vocab.special_ids();
    let special_count = vocab.config().special_token_count();
    let summary_ids: Vec<u32> = tokenize(summary, vocab).iter().map(|t| t.vocab_id).collect();

    let mut inputs = Vec::new();
    for sentence in prepare_document(document, vocab) {
        for offset in 1..=policy.gap {
            let positions = mask_positions(&sentence.tokens, policy, offset)?;
            if positions.is_empty() {
                continue;
            }
            let pair = build_cloze_pair(
                &summary_ids,
                &sentence,
                &positions,
                vocab.mask_id(),
                vocab.filler_id(),
                vocab.max_len(),
                special_count,
            )?;
            inputs.push((pair.help_input(&specials), pair.base_input(&specials)));
        }
    }
    Ok(inputs)
}

/// Runs the model on every cloze input of a pair and collects the aligned
/// outcomes.
pub fn pair_outcomes(
    document: &str,
    summary: &str,
    policy: &MaskingPolicy,
    backend: &dyn MaskedLm,
) -> Result<PairOutcomes, ScoreError> {
    let pairs = cloze_inputs(document, summary, policy, backend)?;
    let expected: usize = pairs.iter().map(|(h, _)| h.masked.len()).sum();
    // a base input identical to its help input (empty summary) is run once
    let mut flat = Vec::with_capacity(2 * pairs.len());
    let mut slots = Vec::with_capacity(pairs.len());
    for (help, base) in pairs {
        let h = flat.len();
        let shared = help == base;
        flat.push(help);
        if !shared {
            flat.push(base);
        }
        slots.push((h, if shared { h } else { h + 1 }));
    }
    let outcomes = backend.predict(&flat)?;
    if outcomes.len() != flat.len() {
        return Err(ScoreError::OutcomeMismatch {
            expected: flat.len(),
            got: outcomes.len(),
        });
    }

    let mut out = PairOutcomes::default();
    for (h, b) in slots {
        out.help.extend_from_slice(&outcomes[h]);
        out.base.extend_from_slice(&outcomes[b]);
    }
    if out.help.len() != expected || out.base.len() != expected {
        return Err(ScoreError::OutcomeMismatch {
            expected,
            got: out.help.len().min(out.base.len()),
        });
    }
    Ok(out)
}

pub fn score_pair(
    document: &str,
    summary: &str,
    policy: &MaskingPolicy,
    variant: ScoreVariant,
    backend: &dyn MaskedLm,
) -> Result<BlancResult, ScoreError> {
    pair_outcomes(document, summary, policy, backend)?.result(variant)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInput {
    pub id: String,
    pub document: String,
    pub summary: String,
}

impl PairInput {
    pub fn new(id: impl Into<String>, document: impl Into<String>, summary: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            document: document.into(),
            summary: summary.into(),
        }
    }
}

/// Scores many pairs, optionally on several worker threads. Output order
/// follows input order and equals sequential [`score_pair`] results; a
/// failing pair only affects its own entry.
pub fn score_batch(
    pairs: &[PairInput],
    policy: &MaskingPolicy,
    variant: ScoreVariant,
    backend: &dyn MaskedLm,
    parallelism: usize,
) -> Result<Vec<(String, Result<BlancResult, ScoreError>)>, ScoreError> {
    let mut seen = HashSet::new();
    if let Some(dup) = pairs.iter().find(|p| !seen.insert(p.id.as_str())) {
        return Err(ScoreError::DuplicateId(dup.id.clone()));
    }
    let results = map_pairs(pairs, backend, parallelism, |pair, backend| {
        score_pair(&pair.document, &pair.summary, policy, variant, backend)
    })?;
    Ok(pairs.iter().map(|p| p.id.clone()).zip(results).collect())
}

/// Applies `f` to every pair on a pool of `parallelism` threads, preserving
/// input order. Calls into a backend without concurrency support are
/// serialized.
pub fn map_pairs<T, F>(
    pairs: &[PairInput],
    backend: &dyn MaskedLm,
    parallelism: usize,
    f: F,
) -> Result<Vec<T>, ScoreError>
where
    T: Send,
    F: Fn(&PairInput, &dyn MaskedLm) -> T + Sync,
{
    if parallelism <= 1 {
        return Ok(pairs.iter().map(|p| f(p, backend)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| ScoreError::Pool(e.to_string()))?;
    let gate = Mutex::new(());
    let serialize = !backend.supports_concurrency();
    Ok(pool.install(|| {
        pairs
            .par_iter()
            .map(|p| {
                let _guard = serialize.then(|| gate.lock().unwrap_or_else(|e| e.into_inner()));
                f(p, backend)
            })
            .collect()
    }))
}

/// Sum of squared scores across gaps, e.g. `B₂² + B₆²`. Signs are
/// discarded; experimental.
pub fn sum_of_squares(scores: &[f64]) -> f64 {
    scores.iter().map(|s| s * s).sum()
}
