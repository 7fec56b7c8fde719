//! Masked-LM inference backends.
//!
//! [`ReferenceBackend`] is a deterministic frequency-table predictor used
//! for tests and dry runs. With the `onnx` feature, [`OnnxBackend`] runs a
//! serialized masked-LM graph from a model bundle directory:
//!
//! ```text
//! bundle/
//!   model.onnx       input_ids, attention_mask [, token_type_ids] -> logits [batch, seq, vocab]
//!   vocab.txt        one token per line, line number = id
//!   tokenizer.json   see `vocab` module
//!   selftest.json    optional, checked at load time
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::masking::ModelInput;
use crate::text_prep::tokenize;
use crate::vocab::Vocabulary;

mod reference;
pub use reference::ReferenceBackend;

#[cfg(feature = "onnx")]
mod onnx;
#[cfg(feature = "onnx")]
pub use onnx::OnnxBackend;

pub const MODEL_FILE: &str = "model.onnx";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const TOKENIZER_FILE: &str = "tokenizer.json";
pub const SELFTEST_FILE: &str = "selftest.json";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("failed to load model bundle ({component}): {reason}")]
    ModelLoad { component: String, reason: String },
    #[error("input of {len} tokens exceeds max length {max_len}")]
    InputTooLong { len: usize, max_len: usize },
    #[error("token id {id} outside vocabulary of {size}")]
    InvalidTokenId { id: u32, size: usize },
    #[error("masked position {position} outside input of {len} tokens")]
    InvalidPosition { position: usize, len: usize },
    #[error("inference failed: {0}")]
    Inference(String),
}

impl BackendError {
    pub fn load(component: &str, reason: impl ToString) -> Self {
        BackendError::ModelLoad {
            component: component.to_string(),
            reason: reason.to_string(),
        }
    }

    /// The bundle component named by a load error.
    pub fn component(&self) -> Option<&str> {
        match self {
            BackendError::ModelLoad { component, .. } => Some(component),
            _ => None,
        }
    }
}

/// Model scores for the gold token at one masked position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutcome {
    pub gold_id: u32,
    pub top_id: u32,
    pub gold_logit: f64,
    pub gold_prob: f64,
    pub gold_logprob: f64,
}

impl PredictionOutcome {
    /// Derives the outcome from a full logit row using a max-shifted
    /// log-sum-exp. Ties for the top id resolve to the lowest id.
    pub fn from_logits<T: Copy + Into<f64>>(logits: &[T], gold_id: u32) -> Self {
        let mut top_id = 0usize;
        let mut max = f64::NEG_INFINITY;
        for (id, &l) in logits.iter().enumerate() {
            let l: f64 = l.into();
            if l > max {
                max = l;
                top_id = id;
            }
        }
        let sum: f64 = logits.iter().map(|&l| (l.into() - max).exp()).sum();
        let gold_logit: f64 = logits[gold_id as usize].into();
        let gold_logprob = gold_logit - max - sum.ln();
        Self {
            gold_id,
            top_id: top_id as u32,
            gold_logit,
            gold_prob: gold_logprob.exp(),
            gold_logprob,
        }
    }

    pub fn is_correct(&self) -> bool {
        self.top_id == self.gold_id
    }
}

/// A masked language model that scores masked positions of framed inputs.
pub trait MaskedLm: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    /// One outcome list per input, one outcome per masked slot, in order.
    fn predict(&self, inputs: &[ModelInput]) -> Result<Vec<Vec<PredictionOutcome>>, BackendError>;

    /// Whether `predict` may be called from several threads at once.
    fn supports_concurrency(&self) -> bool {
        true
    }
}

pub(crate) fn check_input(input: &ModelInput, vocab: &Vocabulary) -> Result<(), BackendError> {
    if input.ids.len() > vocab.max_len() {
        return Err(BackendError::InputTooLong {
            len: input.ids.len(),
            max_len: vocab.max_len(),
        });
    }
    let gold = input.masked.iter().map(|slot| &slot.gold_id);
    if let Some(&id) = input.ids.iter().chain(gold).find(|&&id| id as usize >= vocab.len()) {
        return Err(BackendError::InvalidTokenId { id, size: vocab.len() });
    }
    if let Some(slot) = input.masked.iter().find(|slot| slot.position >= input.ids.len()) {
        return Err(BackendError::InvalidPosition {
            position: slot.position,
            len: input.ids.len(),
        });
    }
    Ok(())
}

/// Self-test fixture stored alongside a bundle.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SelfTest {
    /// Minimum fraction of masked positions whose top-1 id must match.
    #[serde(default = "default_min_agreement")]
    pub min_agreement: f64,
    #[serde(default)]
    pub cases: Vec<SelfTestCase>,
    /// Reference tokenizations captured from the source tokenizer.
    #[serde(default)]
    pub tokenization: Vec<TokenizationCase>,
}

fn default_min_agreement() -> f64 {
    0.98
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfTestCase {
    pub input_ids: Vec<u32>,
    #[serde(default)]
    pub token_type_ids: Option<Vec<u32>>,
    pub masked_positions: Vec<usize>,
    pub expected_top_ids: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenizationCase {
    pub text: String,
    pub ids: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfTestReport {
    pub positions: usize,
    pub agreeing: usize,
    pub tokenization_cases: usize,
}

impl SelfTestReport {
    pub fn agreement(&self) -> f64 {
        if self.positions == 0 {
            1.0
        } else {
            self.agreeing as f64 / self.positions as f64
        }
    }
}

impl SelfTest {
    pub fn read(path: &Path) -> Result<Self, BackendError> {
        let raw = std::fs::read_to_string(path).map_err(|e| BackendError::load("self-test", e))?;
        serde_json::from_str(&raw).map_err(|e| BackendError::load("self-test", e))
    }

    /// Runs the fixture against a backend. Tokenization must match exactly;
    /// top-1 predictions must agree on at least `min_agreement` of positions.
    pub fn verify(&self, backend: &dyn MaskedLm) -> Result<SelfTestReport, BackendError> {
        let vocab = backend.vocab();
        for case in &self.tokenization {
            let ids: Vec<u32> = tokenize(&case.text, vocab).iter().map(|t| t.vocab_id).collect();
            if ids != case.ids {
                return Err(BackendError::load(
                    "self-test",
                    format!("tokenization mismatch for {:?}", case.text),
                ));
            }
        }

        let mut inputs = Vec::with_capacity(self.cases.len());
        for case in &self.cases {
            if case.masked_positions.len() != case.expected_top_ids.len() {
                return Err(BackendError::load("self-test", "positions/expected length mismatch"));
            }
            let segments = case
                .token_type_ids
                .clone()
                .unwrap_or_else(|| vec![0; case.input_ids.len()]);
            let masked =
                case.masked_positions
                    .iter()
                    .map(|&position| {
                        let gold_id = *case.input_ids.get(position).ok_or_else(|| {
                            BackendError::load("self-test", format!("position {position} out of range"))
                        })?;
                        Ok(crate::masking::MaskedSlot { position, gold_id })
                    })
                    .collect::<Result<Vec<_>, BackendError>>()?;
            inputs.push(ModelInput {
                ids: case.input_ids.clone(),
                segments,
                masked,
            });
        }
        let outcomes = backend
            .predict(&inputs)
            .map_err(|e| BackendError::load("self-test", e))?;
        let mut positions = 0;
        let mut agreeing = 0;
        for (case, outs) in self.cases.iter().zip(&outcomes) {
            for (expected, out) in case.expected_top_ids.iter().zip(outs) {
                positions += 1;
                agreeing += usize::from(*expected == out.top_id);
            }
        }
        let report = SelfTestReport {
            positions,
            agreeing,
            tokenization_cases: self.tokenization.len(),
        };
        if report.agreement() < self.min_agreement {
            return Err(BackendError::load(
                "self-test",
                format!("top-1 agreement {agreeing}/{positions} below {:.3}", self.min_agreement),
            ));
        }
        Ok(report)
    }
}

/// Loads a bundle directory and validates its self-test fixture if present.
#[cfg(feature = "onnx")]
pub fn load_bundle(path: &Path) -> Result<OnnxBackend, BackendError> {
    OnnxBackend::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_from_logits() {
        let logits = [1.0f64, 3.0, 2.0];
        let o = PredictionOutcome::from_logits(&logits, 2);
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        assert_eq!(o.top_id, 1);
        assert_eq!(o.gold_logit, 2.0);
        assert!((o.gold_prob - 2f64.exp() / z).abs() < 1e-15);
        assert!((o.gold_logprob - o.gold_prob.ln()).abs() < 1e-15);
        assert!(!o.is_correct());
    }

    #[test]
    fn outcome_is_stable_for_large_logits() {
        let logits = [1000.0f32, 1000.0, -1000.0];
        let o = PredictionOutcome::from_logits(&logits, 1);
        assert_eq!(o.top_id, 0);
        assert!((o.gold_prob - 0.5).abs() < 1e-12);
        assert!(o.gold_prob > 0.0 && o.gold_logprob.is_finite());
    }
}
