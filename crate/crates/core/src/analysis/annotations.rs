use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

pub const MAX_RATING: u8 = 4;

/// Human-rated summary qualities, each on a 0 (very bad) to 4 (very good)
/// scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Fluent,
    Understandable,
    Informative,
    Compact,
    Overall,
}

impl Quality {
    pub const ALL: [Quality; 5] = [
        Quality::Fluent,
        Quality::Understandable,
        Quality::Informative,
        Quality::Compact,
        Quality::Overall,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Quality::Fluent => "fluent",
            Quality::Understandable => "understandable",
            Quality::Informative => "informative",
            Quality::Compact => "compact",
            Quality::Overall => "overall",
        }
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Quality::ALL
            .into_iter()
            .find(|q| q.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown quality `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub pair_id: String,
    pub annotator_id: String,
    pub quality: Quality,
    pub score: u8,
}

/// Validated quality ratings: scores in `0..=4`, at most one record per
/// (pair, annotator, quality).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSet {
    records: Vec<AnnotationRecord>,
}

impl AnnotationSet {
    pub fn new(records: Vec<AnnotationRecord>) -> Result<Self, AnalysisError> {
        let mut seen = HashSet::new();
        for r in &records {
            if r.score > MAX_RATING {
                return Err(AnalysisError::InvalidAnnotation(format!(
                    "score {} for pair `{}` annotator `{}` outside 0..={MAX_RATING}",
                    r.score, r.pair_id, r.annotator_id
                )));
            }
            if !seen.insert((r.pair_id.as_str(), r.annotator_id.as_str(), r.quality)) {
                return Err(AnalysisError::InvalidAnnotation(format!(
                    "duplicate rating for pair `{}` annotator `{}` quality {}",
                    r.pair_id, r.annotator_id, r.quality
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Annotators who rated `quality`, sorted.
    pub fn annotators(&self, quality: Quality) -> Vec<String> {
        self.records
            .iter()
            .filter(|r| r.quality == quality)
            .map(|r| r.annotator_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// pair id → annotator id → rating, for one quality.
    pub fn ratings(&self, quality: Quality) -> BTreeMap<&str, BTreeMap<&str, u8>> {
        let mut out: BTreeMap<&str, BTreeMap<&str, u8>> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.quality == quality) {
            out.entry(r.pair_id.as_str())
                .or_default()
                .insert(r.annotator_id.as_str(), r.score);
        }
        out
    }

    /// Mean rating of all annotators per pair for one quality.
    pub fn mean_scores(&self, quality: Quality) -> BTreeMap<String, f64> {
        self.ratings(quality)
            .into_iter()
            .map(|(pair, by_annotator)| {
                let mean = by_annotator.values().map(|&s| f64::from(s)).sum::<f64>() / by_annotator.len() as f64;
                (pair.to_string(), mean)
            })
            .collect()
    }
}

/// Factual error categories used when annotating summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    IncorrectNamedEntity,
    IncorrectData,
    Cascading,
    Hallucination,
    Negation,
    Other,
}

impl ErrorType {
    pub const ALL: [ErrorType; 6] = [
        ErrorType::IncorrectNamedEntity,
        ErrorType::IncorrectData,
        ErrorType::Cascading,
        ErrorType::Hallucination,
        ErrorType::Negation,
        ErrorType::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorType::IncorrectNamedEntity => "incorrect_named_entity",
            ErrorType::IncorrectData => "incorrect_data",
            ErrorType::Cascading => "cascading",
            ErrorType::Hallucination => "hallucination",
            ErrorType::Negation => "negation",
            ErrorType::Other => "other",
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        let alias = match norm.as_str() {
            "ine" => "incorrect_named_entity",
            other => other,
        };
        ErrorType::ALL
            .into_iter()
            .find(|t| t.as_str() == alias)
            .ok_or_else(|| format!("unknown error type `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub pair_id: String,
    pub annotator_id: String,
    pub error_type: ErrorType,
    /// Byte span in the summary, when recorded.
    pub span: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorAnnotationSet {
    pub records: Vec<ErrorRecord>,
}

impl ErrorAnnotationSet {
    pub fn new(records: Vec<ErrorRecord>) -> Self {
        Self { records }
    }

    /// Number of distinct annotators who marked at least one error, per pair.
    pub fn annotators_per_pair(&self) -> BTreeMap<&str, usize> {
        let mut sets: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for r in &self.records {
            sets.entry(r.pair_id.as_str())
                .or_default()
                .insert(r.annotator_id.as_str());
        }
        sets.into_iter().map(|(k, v)| (k, v.len())).collect()
    }
}
