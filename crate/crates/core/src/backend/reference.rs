use crate::masking::ModelInput;
use crate::vocab::{SpecialIds, TokenizerConfig, Vocabulary};

use super::{check_input, BackendError, MaskedLm, PredictionOutcome};

const BUILTIN_TABLE: &str = include_str!("../../data/reference_vocab.tsv");

/// Default weight added to a token's logit per occurrence in the unmasked
/// context.
pub const DEFAULT_CONTEXT_WEIGHT: f64 = 1.0;

/// Default weight added per neighbor match (see [`ReferenceBackend`]).
pub const DEFAULT_COPY_WEIGHT: f64 = 10.0;

/// Deterministic frequency-table predictor with a copy term.
///
/// For a masked slot at position `p`, the logit of token `t` is
///
/// `ln(count(t) + 1) + context_weight * k + copy_weight * c`
///
/// where `k` counts occurrences of `t` among the visible (non-special,
/// non-filler, unmasked) ids of the input, and `c` counts visible
/// occurrences of `t` at some `j != p` whose left neighbor equals the left
/// neighbor of `p`, plus those whose right neighbor equals the right
/// neighbor of `p`. A summary that repeats a phrase of the document thus
/// lets the model fill the phrase back in. With both weights zero the
/// model is a pure unigram predictor.
#[derive(Debug, Clone)]
pub struct ReferenceBackend {
    vocab: Vocabulary,
    log_freq: Vec<f64>,
    context_weight: f64,
    copy_weight: f64,
}

impl ReferenceBackend {
    /// Builds the backend from the bundled word-frequency table.
    pub fn builtin() -> Self {
        Self::from_table(BUILTIN_TABLE, DEFAULT_CONTEXT_WEIGHT).expect("built-in reference table is valid")
    }

    /// Parses a `token<TAB>count` table. Lines starting with `# ` are
    /// comments; ids follow the order of the remaining lines. The first five
    /// entries must be `[PAD] [UNK] [CLS] [SEP] [MASK]` and the table must
    /// contain a `.` token.
    pub fn from_table(table: &str, context_weight: f64) -> Result<Self, BackendError> {
        let mut tokens = Vec::new();
        let mut counts = Vec::new();
        for (lineno, line) in table.lines().enumerate() {
            if line.starts_with("# ") || line.is_empty() {
                continue;
            }
            let (tok, count) = line.split_once('\t').ok_or_else(|| {
                BackendError::load("vocabulary", format!("line {}: expected token<TAB>count", lineno + 1))
            })?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| BackendError::load("vocabulary", format!("line {}: bad count", lineno + 1)))?;
            tokens.push(tok.to_string());
            counts.push(count);
        }
        let expected = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];
        if tokens.len() < expected.len() || tokens[..expected.len()] != expected {
            return Err(BackendError::load(
                "vocabulary",
                "table must start with [PAD] [UNK] [CLS] [SEP] [MASK]",
            ));
        }
        let filler = tokens
            .iter()
            .position(|t| t == ".")
            .ok_or_else(|| BackendError::load("vocabulary", "missing `.` filler token"))?;
        let config = TokenizerConfig {
            lowercase: true,
            strip_accents: None,
            max_len: 512,
            special_ids: SpecialIds {
                cls: Some(2),
                sep: Some(3),
                mask: 4,
                unk: 1,
                pad: 0,
                filler: filler as u32,
            },
            continuation_prefix: "##".into(),
            max_chars_per_word: 100,
        };
        let vocab = Vocabulary::new(tokens, config).map_err(|e| BackendError::load("vocabulary", e))?;
        Ok(Self::new(vocab, &counts, context_weight))
    }

    /// `counts[i]` is the frequency of token id `i`; missing entries count
    /// as zero.
    pub fn new(vocab: Vocabulary, counts: &[u64], context_weight: f64) -> Self {
        let log_freq = (0..vocab.len())
            .map(|i| (counts.get(i).copied().unwrap_or(0) as f64 + 1.0).ln())
            .collect();
        Self {
            vocab,
            log_freq,
            context_weight,
            copy_weight: DEFAULT_COPY_WEIGHT,
        }
    }

    pub fn with_copy_weight(mut self, copy_weight: f64) -> Self {
        self.copy_weight = copy_weight;
        self
    }

    pub fn context_weight(&self) -> f64 {
        self.context_weight
    }

    pub fn copy_weight(&self) -> f64 {
        self.copy_weight
    }

    fn visible(&self, id: u32) -> bool {
        let s = self.vocab.special_ids();
        ![Some(s.mask), Some(s.pad), Some(s.filler), s.cls, s.sep].contains(&Some(id))
    }

    /// The logit row this backend assigns to position `position` of `input`.
    pub fn logits(&self, input: &ModelInput, position: usize) -> Vec<f64> {
        let ids = &input.ids;
        let mut logits = self.log_freq.clone();
        if self.context_weight != 0.0 {
            for &id in ids.iter().filter(|&&id| self.visible(id)) {
                logits[id as usize] += self.context_weight;
            }
        }
        if self.copy_weight != 0.0 {
            let neighbor = |j: Option<usize>| j.and_then(|j| ids.get(j)).copied().filter(|&id| self.visible(id));
            let left = neighbor(position.checked_sub(1));
            let right = neighbor(Some(position + 1));
            for (j, &id) in ids.iter().enumerate() {
                if j == position || !self.visible(id) {
                    continue;
                }
                let matches = usize::from(left.is_some() && j > 0 && left == Some(ids[j - 1]))
                    + usize::from(right.is_some() && right == ids.get(j + 1).copied());
                logits[id as usize] += self.copy_weight * matches as f64;
            }
        }
        logits
    }
}

impl MaskedLm for ReferenceBackend {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn predict(&self, inputs: &[ModelInput]) -> Result<Vec<Vec<PredictionOutcome>>, BackendError> {
        inputs
            .iter()
            .map(|input| {
                check_input(input, &self.vocab)?;
                if input.masked.is_empty() {
                    return Ok(Vec::new());
                }
                Ok(input
                    .masked
                    .iter()
                    .map(|slot| PredictionOutcome::from_logits(&self.logits(input, slot.position), slot.gold_id))
                    .collect())
            })
            .collect()
    }
}
