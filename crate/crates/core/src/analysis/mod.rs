//! Correlation statistics and the annotator-split comparison harness.

use thiserror::Error;

mod annotations;
mod correlation;
mod splits;
pub mod synthetic;

pub use annotations::{
    AnnotationRecord, AnnotationSet, ErrorAnnotationSet, ErrorRecord, ErrorType, Quality, MAX_RATING,
};
pub use correlation::{average_ranks, pearson, spearman, CorrelationResult};
pub use splits::{
    binomial, enumerate_splits, error_correlation, outperform, outperform_fraction, split_correlation_analysis,
    split_correlation_analysis_with, Outperform, Split, SplitRecord, DEFAULT_ALPHA, DEFAULT_SMALL_GROUP,
};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("no metric score for pairs: {}", .0.join(", "))]
    MissingScores(Vec<String>),
    #[error("invalid split: group of {small} from {total} annotators")]
    InvalidSplit { small: usize, total: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
}
