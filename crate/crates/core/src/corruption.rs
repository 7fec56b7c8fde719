//! Entity-swap corruption of summaries and the swap-sensitivity experiment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::MaskedLm;
use crate::masking::MaskingPolicy;
use crate::scoring::{map_pairs, score_pair, sum_of_squares, PairInput, ScoreError, ScoreVariant};

/// Scores closer than this are reported as unchanged.
pub const UNCHANGED_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CorruptionError {
    #[error("no swappable entity")]
    NoSwappableEntity,
    #[error("no masking policies given")]
    NoPolicies,
    #[error("every pair failed; first error for `{id}`: {reason}")]
    AllPairsFailed { id: String, reason: String },
    #[error("no pairs given")]
    NoPairs,
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    PersonLike,
    Number,
    Date,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::PersonLike => "person_like",
            EntityKind::Number => "number",
            EntityKind::Date => "date",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub kind: EntityKind,
}

const MONTHS: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];
const MONTH_ABBREVIATIONS: [&str; 11] = [
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov",
];
const WEEKDAYS: [&str; 7] = [
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];
const TITLES: [&str; 24] = [
    "mr",
    "mrs",
    "ms",
    "dr",
    "prof",
    "professor",
    "sir",
    "dame",
    "lord",
    "lady",
    "president",
    "king",
    "queen",
    "mayor",
    "governor",
    "senator",
    "minister",
    "chancellor",
    "judge",
    "chief",
    "captain",
    "general",
    "pope",
    "rev",
];

/// Capitalized words that start sentences without naming anything.
const SENTENCE_STARTERS: &[&str] = &[
    "a",
    "about",
    "according",
    "after",
    "all",
    "also",
    "although",
    "an",
    "and",
    "another",
    "any",
    "as",
    "at",
    "because",
    "before",
    "both",
    "but",
    "by",
    "despite",
    "during",
    "each",
    "earlier",
    "even",
    "every",
    "few",
    "for",
    "from",
    "he",
    "her",
    "here",
    "his",
    "how",
    "however",
    "i",
    "if",
    "in",
    "it",
    "its",
    "last",
    "later",
    "many",
    "meanwhile",
    "more",
    "most",
    "much",
    "my",
    "new",
    "next",
    "no",
    "nobody",
    "none",
    "now",
    "officials",
    "on",
    "once",
    "one",
    "only",
    "other",
    "our",
    "over",
    "police",
    "she",
    "since",
    "so",
    "some",
    "such",
    "that",
    "the",
    "their",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "though",
    "three",
    "to",
    "today",
    "tomorrow",
    "two",
    "under",
    "until",
    "we",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "why",
    "with",
    "yesterday",
    "you",
    "your",
];

/// Common nouns that often open news sentences.
const COMMON_OPENERS: &[&str] = &[
    "analysts",
    "authorities",
    "children",
    "costs",
    "critics",
    "doctors",
    "experts",
    "exports",
    "families",
    "fans",
    "firefighters",
    "flights",
    "imports",
    "investigators",
    "lawmakers",
    "markets",
    "parents",
    "people",
    "prices",
    "profits",
    "protesters",
    "rates",
    "researchers",
    "residents",
    "rescuers",
    "sales",
    "schools",
    "scientists",
    "shares",
    "stocks",
    "students",
    "taxes",
    "temperatures",
    "troops",
    "voters",
    "witnesses",
    "workers",
];

#[derive(Debug, Clone)]
struct Word<'a> {
    start: usize,
    end: usize,
    text: &'a str,
    sentence_initial: bool,
    /// Only whitespace separates this word from the previous one.
    joined_to_previous: bool,
}

impl Word<'_> {
    fn lower(&self) -> String {
        self.text.to_lowercase()
    }

    fn is_capitalized(&self) -> bool {
        self.text.chars().next().is_some_and(char::is_uppercase)
    }

    fn is_numeric(&self) -> bool {
        self.text.chars().next().is_some_and(|c| c.is_ascii_digit())
    }

    fn day_number(&self) -> Option<u32> {
        let digits = self.text.trim_end_matches(|c: char| c.is_ascii_alphabetic());
        let suffix = &self.text[digits.len()..];
        if !(suffix.is_empty() || ["st", "nd", "rd", "th"].contains(&suffix)) || digits.len() > 2 {
            return None;
        }
        digits.parse().ok().filter(|d| (1..=31).contains(d))
    }

    fn is_year(&self) -> bool {
        self.text.len() == 4
            && self.text.chars().all(|c| c.is_ascii_digit())
            && (1800..=2099).contains(&self.text.parse::<u32>().unwrap_or(0))
    }
}

fn is_month(lower: &str, followed_by_period: bool) -> bool {
    MONTHS.contains(&lower) || (followed_by_period && MONTH_ABBREVIATIONS.contains(&lower))
}

fn words(text: &str) -> Vec<Word<'_>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out: Vec<Word<'_>> = Vec::new();
    let mut i = 0;
    let mut sentence_initial = true;
    let mut gap_is_space = false;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !c.is_alphanumeric() {
            if matches!(c, '.' | '!' | '?') {
                sentence_initial = true;
            }
            gap_is_space &= c.is_whitespace();
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() {
            let ch = chars[j].1;
            let next_alnum = chars.get(j + 1).is_some_and(|&(_, n)| n.is_alphanumeric());
            let prev_digit = chars[j - 1].1.is_ascii_digit();
            let next_digit = chars.get(j + 1).is_some_and(|&(_, n)| n.is_ascii_digit());
            if ch.is_alphanumeric()
                || (matches!(ch, '\'' | '’' | '-') && next_alnum)
                || (matches!(ch, '.' | ',') && prev_digit && next_digit)
            {
                j += 1;
            } else {
                break;
            }
        }
        let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
        let mut word = &text[pos..end];
        for suffix in ["'s", "’s"] {
            if let Some(stem) = word.strip_suffix(suffix) {
                word = stem;
            }
        }
        out.push(Word {
            start: pos,
            end: pos + word.len(),
            text: word,
            sentence_initial,
            joined_to_previous: gap_is_space && !out.is_empty(),
        });
        sentence_initial = false;
        gap_is_space = true;
        i = j;
    }
    out
}

/// Rule-based extraction of dates, numbers and capitalized name sequences.
/// Entities are returned in text order and never overlap.
pub fn extract_entities(text: &str) -> Vec<Entity> {
    let words = words(text);
    let mut taken = vec![false; words.len()];
    let mut found: Vec<Entity> = Vec::new();
    let period_after = |w: &Word<'_>| text[w.end..].starts_with('.');
    let comma_between = |a: &Word<'_>, b: &Word<'_>| text[a.end..b.start].trim() == ",";
    let mut push = |from: usize, to: usize, kind: EntityKind, taken: &mut Vec<bool>| {
        for t in taken.iter_mut().take(to + 1).skip(from) {
            *t = true;
        }
        let (start, end) = (words[from].start, words[to].end);
        found.push(Entity {
            start,
            end,
            text: text[start..end].to_string(),
            kind,
        });
    };

    // dates
    let mut i = 0;
    while i < words.len() {
        let w = &words[i];
        let lower = w.lower();
        if w.is_capitalized() && is_month(&lower, period_after(w)) {
            let mut end = i;
            let mut has_detail = false;
            if let Some(day) = words.get(i + 1).filter(|d| d.day_number().is_some()) {
                end = i + 1;
                has_detail = true;
                if words.get(i + 2).is_some_and(|y| y.is_year() && comma_between(day, y)) {
                    end = i + 2;
                }
            } else if words.get(i + 1).is_some_and(|y| y.is_year()) {
                end = i + 1;
                has_detail = true;
            }
            // "May" alone is usually the verb
            if lower != "may" || has_detail {
                let start = if i > 0 && words[i - 1].day_number().is_some() && !taken[i - 1] {
                    i - 1
                } else {
                    i
                };
                push(start, end, EntityKind::Date, &mut taken);
                i = end + 1;
                continue;
            }
        } else if w.is_capitalized() && WEEKDAYS.contains(&lower.as_str()) {
            push(i, i, EntityKind::Date, &mut taken);
        }
        i += 1;
    }
    for (k, w) in words.iter().enumerate() {
        if !taken[k] && w.is_year() {
            push(k, k, EntityKind::Date, &mut taken);
        }
    }

    // numbers
    for (k, w) in words.iter().enumerate() {
        if !taken[k] && w.is_numeric() && w.text.chars().all(|c| c.is_ascii_digit() || c == ',' || c == '.') {
            push(k, k, EntityKind::Number, &mut taken);
        }
    }

    // capitalized sequences
    let mut k = 0;
    while k < words.len() {
        let w = &words[k];
        if taken[k] || !w.is_capitalized() || w.is_numeric() {
            k += 1;
            continue;
        }
        let mut end = k;
        while end + 1 < words.len()
            && !taken[end + 1]
            && words[end + 1].is_capitalized()
            && words[end + 1].joined_to_previous
            && !words[end + 1].sentence_initial
        {
            end += 1;
        }
        let mut start = k;
        while start <= end {
            let lower = words[start].lower();
            let is_title = TITLES.contains(&lower.as_str());
            let is_starter = words[start].sentence_initial
                && (SENTENCE_STARTERS.contains(&lower.as_str()) || COMMON_OPENERS.contains(&lower.as_str()));
            if is_title || is_starter || lower == "i" {
                start += 1;
            } else {
                break;
            }
        }
        if start <= end {
            push(start, end, EntityKind::PersonLike, &mut taken);
        }
        k = end + 1;
    }

    found.sort_by_key(|e| e.start);
    found
}

/// Entities seen per source document, grouped by kind.
#[derive(Debug, Clone, Default)]
pub struct EntityPool {
    by_kind: BTreeMap<EntityKind, BTreeSet<(String, String)>>,
}

impl EntityPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds every entity of `text`, attributed to `source_id`.
    pub fn add_text(&mut self, source_id: &str, text: &str) {
        for e in extract_entities(text) {
            self.add(source_id, e.kind, &e.text);
        }
    }

    pub fn add(&mut self, source_id: &str, kind: EntityKind, text: &str) {
        self.by_kind
            .entry(kind)
            .or_default()
            .insert((source_id.to_string(), text.to_string()));
    }

    /// Distinct replacement texts of `kind` from sources other than
    /// `exclude_source` that differ from `original` (case-insensitively).
    pub fn candidates(&self, kind: EntityKind, exclude_source: &str, original: &str) -> Vec<&str> {
        let original = original.to_lowercase();
        self.by_kind
            .get(&kind)
            .into_iter()
            .flatten()
            .filter(|(src, text)| src != exclude_source && text.to_lowercase() != original)
            .map(|(_, text)| text.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwappedSpan {
    pub start: usize,
    pub end: usize,
    pub original_text: String,
    pub replacement_text: String,
    pub entity_kind: EntityKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Swap {
    pub original_summary: String,
    pub corrupted_summary: String,
    pub swapped_span: SwappedSpan,
}

/// Replaces one uniformly chosen swappable entity of `summary` with a
/// same-kind entity drawn uniformly from other sources in `pool`.
pub fn swap_entity(
    summary: &str,
    source_id: &str,
    pool: &EntityPool,
    rng: &mut ChaCha8Rng,
) -> Result<Swap, CorruptionError> {
    let options: Vec<(Entity, Vec<&str>)> = extract_entities(summary)
        .into_iter()
        .map(|e| {
            let c = pool.candidates(e.kind, source_id, &e.text);
            (e, c)
        })
        .filter(|(_, c)| !c.is_empty())
        .collect();
    let (entity, candidates) = options.choose(rng).ok_or(CorruptionError::NoSwappableEntity)?;
    let replacement = *candidates.choose(rng).expect("non-empty candidates");
    let corrupted_summary = format!("{}{}{}", &summary[..entity.start], replacement, &summary[entity.end..]);
    Ok(Swap {
        original_summary: summary.to_string(),
        corrupted_summary,
        swapped_span: SwappedSpan {
            start: entity.start,
            end: entity.end,
            original_text: entity.text.clone(),
            replacement_text: replacement.to_string(),
            entity_kind: entity.kind,
        },
    })
}

/// Seeded generator for the `index`-th pair of an experiment.
pub fn pair_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyScores {
    pub gap: usize,
    pub mask_width: usize,
    pub score_before: f64,
    pub score_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapTrial {
    pub pair_id: String,
    pub original_summary: String,
    pub corrupted_summary: String,
    pub swapped_span: SwappedSpan,
    pub scores: Vec<PolicyScores>,
    /// Sum of squared scores over all policies, before and after, when more
    /// than one policy was run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_of_squares: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Decreased,
    Increased,
    Unchanged,
}

pub fn direction(before: f64, after: f64) -> Direction {
    let delta = after - before;
    if delta.abs() < UNCHANGED_TOLERANCE {
        Direction::Unchanged
    } else if delta < 0.0 {
        Direction::Decreased
    } else {
        Direction::Increased
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapSummary {
    /// Gap number, or `sumsq` for the combined metric.
    pub label: String,
    pub n_trials: usize,
    pub frac_decreased: f64,
    pub frac_increased: f64,
    pub frac_unchanged: f64,
}

impl SwapSummary {
    fn from_pairs(label: String, pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut dec, mut inc, mut same) = (0usize, 0usize, 0usize);
        for (before, after) in pairs {
            match direction(before, after) {
                Direction::Decreased => dec += 1,
                Direction::Increased => inc += 1,
                Direction::Unchanged => same += 1,
            }
        }
        let n = dec + inc + same;
        let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        Self {
            label,
            n_trials: n,
            frac_decreased: frac(dec),
            frac_increased: frac(inc),
            frac_unchanged: frac(same),
        }
    }
}

#[derive(Debug)]
pub struct SwapReport {
    pub trials: Vec<SwapTrial>,
    pub summaries: Vec<SwapSummary>,
    /// Pairs without a trial: no swappable entity or a scoring error.
    pub skipped: Vec<(String, String)>,
}

pub struct SwapConfig<'a> {
    pub policies: &'a [MaskingPolicy],
    pub variant: ScoreVariant,
    pub seed: u64,
    pub parallelism: usize,
}

/// Swaps one entity in each summary and scores the original and the
/// corrupted summary against the document under every policy.
///
/// Replacement entities come from the documents and summaries of the other
/// pairs. Pair `i` draws from `pair_rng(seed, i)`, so results do not depend
/// on `parallelism`.
pub fn swap_experiment(
    pairs: &[PairInput],
    config: &SwapConfig<'_>,
    backend: &dyn MaskedLm,
) -> Result<SwapReport, CorruptionError> {
    if config.policies.is_empty() {
        return Err(CorruptionError::NoPolicies);
    }
    if pairs.is_empty() {
        return Err(CorruptionError::NoPairs);
    }
    let mut pool = EntityPool::new();
    for p in pairs {
        pool.add_text(&p.id, &p.document);
        pool.add_text(&p.id, &p.summary);
    }

    let indexed: Vec<PairInput> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| PairInput::new(i.to_string(), p.document.clone(), p.summary.clone()))
        .collect();
    let outcomes = map_pairs(&indexed, backend, config.parallelism, |input, backend| {
        let index: usize = input.id.parse().expect("index id");
        let pair = &pairs[index];
        let mut rng = pair_rng(config.seed, index as u64);
        let swap = swap_entity(&pair.summary, &pair.id, &pool, &mut rng)?;
        let mut scores = Vec::with_capacity(config.policies.len());
        for policy in config.policies {
            let before = score_pair(&pair.document, &swap.original_summary, policy, config.variant, backend)?;
            let after = score_pair(&pair.document, &swap.corrupted_summary, policy, config.variant, backend)?;
            scores.push(PolicyScores {
                gap: policy.gap,
                mask_width: policy.mask_width,
                score_before: before.score,
                score_after: after.score,
            });
        }
        let sum_of_squares = (scores.len() > 1).then(|| {
            let before: Vec<f64> = scores.iter().map(|s| s.score_before).collect();
            let after: Vec<f64> = scores.iter().map(|s| s.score_after).collect();
            (sum_of_squares(&before), sum_of_squares(&after))
        });
        Ok::<_, CorruptionError>(SwapTrial {
            pair_id: pair.id.clone(),
            original_summary: swap.original_summary,
            corrupted_summary: swap.corrupted_summary,
            swapped_span: swap.swapped_span,
            scores,
            sum_of_squares,
        })
    })?;

    let mut trials = Vec::new();
    let mut skipped = Vec::new();
    let mut first_error = None;
    for (pair, outcome) in pairs.iter().zip(outcomes) {
        match outcome {
            Ok(t) => trials.push(t),
            Err(e) => {
                if !matches!(e, CorruptionError::NoSwappableEntity) && first_error.is_none() {
                    first_error = Some((pair.id.clone(), e.to_string()));
                }
                skipped.push((pair.id.clone(), e.to_string()));
            }
        }
    }
    if trials.is_empty() {
        let (id, reason) = first_error.unwrap_or_else(|| skipped[0].clone());
        return Err(CorruptionError::AllPairsFailed { id, reason });
    }

    let mut summaries: Vec<SwapSummary> = config
        .policies
        .iter()
        .enumerate()
        .map(|(k, policy)| {
            let label = if config.policies.iter().filter(|p| p.gap == policy.gap).count() > 1 {
                format!("{}w{}", policy.gap, policy.mask_width)
            } else {
                policy.gap.to_string()
            };
            SwapSummary::from_pairs(
                label,
                trials
                    .iter()
                    .map(|t| (t.scores[k].score_before, t.scores[k].score_after)),
            )
        })
        .collect();
    if config.policies.len() > 1 {
        summaries.push(SwapSummary::from_pairs(
            "sumsq".into(),
            trials.iter().filter_map(|t| t.sum_of_squares),
        ));
    }
    Ok(SwapReport {
        trials,
        summaries,
        skipped,
    })
}
