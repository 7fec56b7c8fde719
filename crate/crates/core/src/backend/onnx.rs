use std::path::Path;
use std::sync::Arc;

use tract_onnx::prelude::*;

use crate::masking::ModelInput;
use crate::vocab::{read_vocab_file, TokenizerConfig, Vocabulary};

use super::{
    check_input, BackendError, MaskedLm, PredictionOutcome, SelfTest, SelfTestReport, MODEL_FILE, SELFTEST_FILE,
    TOKENIZER_FILE, VOCAB_FILE,
};

pub const DEFAULT_MAX_BATCH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputRole {
    Ids,
    AttentionMask,
    TokenTypes,
}

/// Masked-LM backend running an ONNX graph on the CPU.
pub struct OnnxBackend {
    vocab: Vocabulary,
    plan: Arc<TypedRunnableModel>,
    inputs: Vec<InputRole>,
    max_batch: usize,
    self_test: Option<SelfTestReport>,
}

impl std::fmt::Debug for OnnxBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OnnxBackend")
            .field("vocab_size", &self.vocab.len())
            .field("inputs", &self.inputs)
            .field("max_batch", &self.max_batch)
            .finish()
    }
}

impl OnnxBackend {
    /// Loads `model.onnx`, `vocab.txt` and `tokenizer.json` from a bundle
    /// directory, then runs `selftest.json` when the bundle has one.
    pub fn load(dir: &Path) -> Result<Self, BackendError> {
        if !dir.is_dir() {
            return Err(BackendError::load(
                "bundle",
                format!("{} is not a directory", dir.display()),
            ));
        }
        let tokens = read_vocab_file(&dir.join(VOCAB_FILE)).map_err(|e| BackendError::load("vocabulary", e))?;
        let raw =
            std::fs::read_to_string(dir.join(TOKENIZER_FILE)).map_err(|e| BackendError::load("tokenizer config", e))?;
        let config: TokenizerConfig =
            serde_json::from_str(&raw).map_err(|e| BackendError::load("tokenizer config", e))?;
        let vocab = Vocabulary::new(tokens, config).map_err(|e| BackendError::load("tokenizer config", e))?;

        let (plan, inputs) = load_graph(&dir.join(MODEL_FILE))?;
        let mut backend = Self {
            vocab,
            plan,
            inputs,
            max_batch: DEFAULT_MAX_BATCH,
            self_test: None,
        };

        let selftest_path = dir.join(SELFTEST_FILE);
        if selftest_path.exists() {
            let fixture = SelfTest::read(&selftest_path)?;
            backend.self_test = Some(fixture.verify(&backend)?);
        }
        Ok(backend)
    }

    pub fn with_max_batch(mut self, max_batch: usize) -> Self {
        self.max_batch = max_batch.max(1);
        self
    }

    /// Result of the bundle's self-test, if it shipped one.
    pub fn self_test(&self) -> Option<SelfTestReport> {
        self.self_test
    }

    fn run_group(&self, group: &[&ModelInput]) -> Result<Vec<Vec<PredictionOutcome>>, BackendError> {
        let batch = group.len();
        let seq = group[0].ids.len();
        let mut tensors: TVec<TValue> = TVec::new();
        for role in &self.inputs {
            let data: Vec<i64> = match role {
                InputRole::Ids => group.iter().flat_map(|i| i.ids.iter().map(|&x| x as i64)).collect(),
                InputRole::AttentionMask => vec![1; batch * seq],
                InputRole::TokenTypes => group
                    .iter()
                    .flat_map(|i| i.segments.iter().map(|&x| x as i64))
                    .collect(),
            };
            let t = tract_ndarray::Array2::from_shape_vec((batch, seq), data)
                .map_err(|e| BackendError::Inference(e.to_string()))?;
            tensors.push(t.into_tensor().into());
        }
        let outputs = self
            .plan
            .run(tensors)
            .map_err(|e| BackendError::Inference(e.to_string()))?;
        let logits = outputs[0]
            .to_plain_array_view::<f32>()
            .map_err(|e| BackendError::Inference(e.to_string()))?;
        let shape = logits.shape();
        if shape.len() != 3 || shape[0] != batch || shape[1] != seq || shape[2] != self.vocab.len() {
            return Err(BackendError::Inference(format!(
                "unexpected logits shape {shape:?} for batch {batch} x {seq} and vocabulary {}",
                self.vocab.len()
            )));
        }
        Ok(group
            .iter()
            .enumerate()
            .map(|(b, input)| {
                input
                    .masked
                    .iter()
                    .map(|slot| {
                        let row = logits.slice(tract_ndarray::s![b, slot.position, ..]);
                        let row: Vec<f32> = row.iter().copied().collect();
                        PredictionOutcome::from_logits(&row, slot.gold_id)
                    })
                    .collect()
            })
            .collect())
    }
}

fn load_graph(path: &Path) -> Result<(Arc<TypedRunnableModel>, Vec<InputRole>), BackendError> {
    let err = |e: TractError| BackendError::load("model", e.to_string());
    if !path.exists() {
        return Err(BackendError::load("model", format!("{} not found", path.display())));
    }
    let mut model = tract_onnx::onnx().model_for_path(path).map_err(err)?;
    let outlets = model.input_outlets().map_err(err)?.to_vec();
    let mut roles = Vec::with_capacity(outlets.len());
    for (k, outlet) in outlets.iter().enumerate() {
        let name = model.node(outlet.node).name.to_lowercase();
        let role = if name.contains("mask") {
            InputRole::AttentionMask
        } else if name.contains("type") || name.contains("segment") {
            InputRole::TokenTypes
        } else if name.contains("ids") || name.contains("input") {
            InputRole::Ids
        } else {
            match k {
                0 => InputRole::Ids,
                1 => InputRole::AttentionMask,
                _ => InputRole::TokenTypes,
            }
        };
        roles.push(role);
    }
    if !roles.contains(&InputRole::Ids) {
        return Err(BackendError::load("model", "graph has no token id input"));
    }

    let batch = model.symbols.sym("B");
    let seq = model.symbols.sym("S");
    for k in 0..outlets.len() {
        model
            .set_input_fact(
                k,
                InferenceFact::dt_shape(i64::datum_type(), tvec![batch.to_dim(), seq.to_dim()]),
            )
            .map_err(err)?;
    }
    let plan = model.into_optimized().and_then(|m| m.into_runnable()).map_err(err)?;
    Ok((plan, roles))
}

impl MaskedLm for OnnxBackend {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Inputs are grouped by length and run in unpadded batches of at most
    /// `max_batch`; results come back in input order.
    fn predict(&self, inputs: &[ModelInput]) -> Result<Vec<Vec<PredictionOutcome>>, BackendError> {
        for input in inputs {
            check_input(input, &self.vocab)?;
        }
        let mut results: Vec<Option<Vec<PredictionOutcome>>> = vec![None; inputs.len()];
        let mut order: Vec<usize> = (0..inputs.len())
            .filter(|&i| {
                if inputs[i].masked.is_empty() {
                    results[i] = Some(Vec::new());
                    false
                } else {
                    true
                }
            })
            .collect();
        order.sort_by_key(|&i| inputs[i].ids.len());

        for same_len in order.chunk_by(|&a, &b| inputs[a].ids.len() == inputs[b].ids.len()) {
            for chunk in same_len.chunks(self.max_batch) {
                let group: Vec<&ModelInput> = chunk.iter().map(|&i| &inputs[i]).collect();
                for (&i, out) in chunk.iter().zip(self.run_group(&group)?) {
                    results[i] = Some(out);
                }
            }
        }
        Ok(results.into_iter().map(|r| r.expect("every input filled")).collect())
    }
}
