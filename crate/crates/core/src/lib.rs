//! BLANC-help: reference-free summary quality scoring.
//!
//! A summary is scored by how much it helps a masked language model fill
//! in masked tokens of the document it summarizes. Each document sentence
//! is masked in `gap` interleaved passes; every pass is run twice, once
//! prefixed with the summary ("help") and once with a same-length run of
//! period tokens ("base"). The score is the micro-averaged difference
//! between the two.
//!
//! ```
//! use blanc::backend::ReferenceBackend;
//! use blanc::masking::MaskingPolicy;
//! use blanc::scoring::{score_pair, ScoreVariant};
//!
//! let backend = ReferenceBackend::builtin();
//! let doc = "Police said the report found problems. Officials told reporters on Monday.";
//! let r = score_pair(doc, "Police report found problems.", &MaskingPolicy::with_gap(2),
//!                    ScoreVariant::Accuracy, &backend).unwrap();
//! assert!(r.n_total > 0);
//! ```

pub mod analysis;
pub mod backend;
pub mod corruption;
pub mod masking;
pub mod scoring;
pub mod text_prep;
pub mod vocab;

pub use backend::{MaskedLm, PredictionOutcome, ReferenceBackend};
pub use masking::MaskingPolicy;
pub use scoring::{score_batch, score_pair, BlancResult, PairInput, ScoreVariant};
