use std::collections::BTreeMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::{pearson, spearman, AnalysisError, AnnotationSet, CorrelationResult, ErrorAnnotationSet, Quality};

pub const DEFAULT_SMALL_GROUP: usize = 3;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Indices into a sorted annotator list: a small group and its complement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Split {
    pub small: Vec<usize>,
    pub large: Vec<usize>,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All `C(n, k)` ways to pick a group of `k` from `n`, in lexicographic
/// order of the small group.
pub fn enumerate_splits(n: usize, k: usize) -> Result<Vec<Split>, AnalysisError> {
    if k == 0 || k >= n {
        return Err(AnalysisError::InvalidSplit { small: k, total: n });
    }
    Ok((0..n)
        .combinations(k)
        .map(|small| {
            let large = (0..n).filter(|i| !small.contains(i)).collect();
            Split { small, large }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub split_id: usize,
    pub small: Vec<String>,
    pub large: Vec<String>,
    /// Mean of the small group vs mean of the large group; `None` when the
    /// correlation is undefined (e.g. a constant series).
    pub human_human: Option<CorrelationResult>,
    /// Metric score vs mean of the large group.
    pub metric_human: Option<CorrelationResult>,
}

impl SplitRecord {
    /// Coefficient if defined and significant at `alpha`.
    pub fn significant_human(&self, alpha: f64) -> Option<f64> {
        significant(self.human_human, alpha)
    }

    pub fn significant_metric(&self, alpha: f64) -> Option<f64> {
        significant(self.metric_human, alpha)
    }
}

fn significant(c: Option<CorrelationResult>, alpha: f64) -> Option<f64> {
    c.filter(|c| c.is_significant(alpha)).map(|c| c.coefficient)
}

/// Splits the annotators of `quality` into every group of three and its
/// complement, and correlates (Spearman) the small group's mean rating and
/// the metric score against the large group's mean rating.
pub fn split_correlation_analysis(
    annotations: &AnnotationSet,
    scores: &BTreeMap<String, f64>,
    quality: Quality,
) -> Result<Vec<SplitRecord>, AnalysisError> {
    split_correlation_analysis_with(annotations, scores, quality, DEFAULT_SMALL_GROUP)
}

pub fn split_correlation_analysis_with(
    annotations: &AnnotationSet,
    scores: &BTreeMap<String, f64>,
    quality: Quality,
    small_group: usize,
) -> Result<Vec<SplitRecord>, AnalysisError> {
    let annotators = annotations.annotators(quality);
    let ratings = annotations.ratings(quality);
    if ratings.is_empty() {
        return Err(AnalysisError::EmptyInput("no ratings for quality"));
    }
    let missing: Vec<String> = ratings
        .keys()
        .filter(|p| !scores.contains_key(**p))
        .map(|p| p.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(AnalysisError::MissingScores(missing));
    }

    // pair-major rating matrix, None where an annotator skipped a pair
    let matrix: Vec<(f64, Vec<Option<f64>>)> = ratings
        .iter()
        .map(|(pair, by_ann)| {
            let row = annotators
                .iter()
                .map(|a| by_ann.get(a.as_str()).map(|&s| f64::from(s)))
                .collect();
            (scores[*pair], row)
        })
        .collect();

    let splits = enumerate_splits(annotators.len(), small_group)?;
    Ok(splits
        .into_iter()
        .enumerate()
        .map(|(split_id, split)| {
            let mut small_means = Vec::with_capacity(matrix.len());
            let mut large_means = Vec::with_capacity(matrix.len());
            let mut metric = Vec::with_capacity(matrix.len());
            for (score, row) in &matrix {
                if let (Some(s), Some(l)) = (group_mean(row, &split.small), group_mean(row, &split.large)) {
                    small_means.push(s);
                    large_means.push(l);
                    metric.push(*score);
                }
            }
            SplitRecord {
                split_id,
                small: split.small.iter().map(|&i| annotators[i].clone()).collect(),
                large: split.large.iter().map(|&i| annotators[i].clone()).collect(),
                human_human: spearman(&small_means, &large_means).ok(),
                metric_human: spearman(&metric, &large_means).ok(),
            }
        })
        .collect())
}

fn group_mean(row: &[Option<f64>], members: &[usize]) -> Option<f64> {
    let vals: Vec<f64> = members.iter().filter_map(|&i| row[i]).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outperform {
    pub wins: usize,
    pub compared: usize,
    pub fraction: f64,
}

/// Share of splits in which the metric correlates with the large group more
/// strongly than the small group does.
///
/// Coefficients that are undefined or not significant at `alpha` count as
/// absent: a present coefficient beats an absent one, and splits where both
/// are absent are left out of the denominator.
pub fn outperform(records: &[SplitRecord], alpha: f64) -> Result<Outperform, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::EmptyInput("no split records"));
    }
    let mut wins = 0;
    let mut compared = 0;
    for r in records {
        let win = match (r.significant_metric(alpha), r.significant_human(alpha)) {
            (None, None) => continue,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(m), Some(h)) => m > h,
        };
        compared += 1;
        wins += usize::from(win);
    }
    if compared == 0 {
        return Err(AnalysisError::EmptyInput("no significant correlations"));
    }
    Ok(Outperform {
        wins,
        compared,
        fraction: wins as f64 / compared as f64,
    })
}

pub fn outperform_fraction(records: &[SplitRecord]) -> Result<f64, AnalysisError> {
    outperform(records, DEFAULT_ALPHA).map(|o| o.fraction)
}

/// Correlates metric scores with the number of distinct annotators who
/// flagged at least one factual error on each pair. Pairs without error
/// records count as zero. Returns `(spearman, pearson)`.
pub fn error_correlation(
    scores: &BTreeMap<String, f64>,
    errors: &ErrorAnnotationSet,
) -> Result<(CorrelationResult, CorrelationResult), AnalysisError> {
    if scores.len() < 3 {
        return Err(AnalysisError::DegenerateInput("fewer than 3 pairs"));
    }
    let counts = errors.annotators_per_pair();
    let xs: Vec<f64> = scores.values().copied().collect();
    let ys: Vec<f64> = scores
        .keys()
        .map(|p| counts.get(p.as_str()).copied().unwrap_or(0) as f64)
        .collect();
    Ok((spearman(&xs, &ys)?, pearson(&xs, &ys)?))
}
