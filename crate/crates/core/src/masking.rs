//! Selection of maskable positions and construction of base/help cloze
//! inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text_prep::{Sentence, Token, WordRole};
use crate::vocab::SpecialIds;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskingError {
    #[error("invalid masking policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("offset {offset} outside 1..={gap}")]
    InvalidOffset { offset: usize, gap: usize },
    #[error("sentence of {tokens} tokens plus {special} special tokens exceeds max length {max_len}")]
    SentenceTooLong {
        tokens: usize,
        special: usize,
        max_len: usize,
    },
}

/// Masking parameters. Defaults are the original BLANC-help settings:
/// every 6th token, whole words of at least 4 characters, every word start,
/// no continuation pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskingPolicy {
    pub gap: usize,
    pub min_word_len: usize,
    pub min_start_len: usize,
    pub min_cont_len: usize,
    pub mask_width: usize,
}

impl Default for MaskingPolicy {
    fn default() -> Self {
        Self {
            gap: 6,
            min_word_len: 4,
            min_start_len: 0,
            min_cont_len: 1000,
            mask_width: 1,
        }
    }
}

impl MaskingPolicy {
    pub fn with_gap(gap: usize) -> Self {
        Self { gap, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), MaskingError> {
        if self.gap == 0 {
            return Err(MaskingError::InvalidPolicy("gap must be at least 1"));
        }
        if self.mask_width == 0 {
            return Err(MaskingError::InvalidPolicy("mask_width must be at least 1"));
        }
        Ok(())
    }

    pub fn is_eligible(&self, token: &Token) -> bool {
        is_eligible(token, self)
    }
}

pub fn is_eligible(token: &Token, policy: &MaskingPolicy) -> bool {
    let min = match token.word_role {
        WordRole::WholeWord => policy.min_word_len,
        WordRole::WordStart => policy.min_start_len,
        WordRole::WordContinuation => policy.min_cont_len,
    };
    token.char_length >= min
}

/// Zero-based indices masked in one offset pass.
///
/// With one-based token index `i`, index `i` is selected when the token is
/// eligible and `i ≡ offset (mod gap)`. A `mask_width` above one extends each
/// selected index over the following `mask_width - 1` tokens, keeping only
/// the eligible ones.
pub fn mask_positions(tokens: &[Token], policy: &MaskingPolicy, offset: usize) -> Result<Vec<usize>, MaskingError> {
    policy.validate()?;
    if offset == 0 || offset > policy.gap {
        return Err(MaskingError::InvalidOffset {
            offset,
            gap: policy.gap,
        });
    }
    let residue = offset % policy.gap;
    let mut selected = vec![false; tokens.len()];
    for (idx, token) in tokens.iter().enumerate() {
        if (idx + 1) % policy.gap != residue || !is_eligible(token, policy) {
            continue;
        }
        let end = (idx + policy.mask_width).min(tokens.len());
        for (k, t) in tokens.iter().enumerate().take(end).skip(idx) {
            if is_eligible(t, policy) {
                selected[k] = true;
            }
        }
    }
    Ok(selected
        .iter()
        .enumerate()
        .filter_map(|(k, &s)| s.then_some(k))
        .collect())
}

/// Aligned base (filler) and help (summary) inputs for one masked sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClozePair {
    pub base_prefix: Vec<u32>,
    pub help_prefix: Vec<u32>,
    /// Sentence ids with masked positions replaced by the mask id.
    pub sentence_tokens: Vec<u32>,
    pub masked_positions: Vec<usize>,
    pub gold_ids: Vec<u32>,
}

/// A single model input: framed ids plus the absolute positions to score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelInput {
    pub ids: Vec<u32>,
    /// Segment id per position: 0 for the framing prefix, 1 for the sentence.
    pub segments: Vec<u32>,
    pub masked: Vec<MaskedSlot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskedSlot {
    pub position: usize,
    pub gold_id: u32,
}

impl ModelInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

impl ClozePair {
    pub fn base_input(&self, specials: &SpecialIds) -> ModelInput {
        self.frame(&self.base_prefix, specials)
    }

    pub fn help_input(&self, specials: &SpecialIds) -> ModelInput {
        self.frame(&self.help_prefix, specials)
    }

    // [CLS] prefix [SEP] sentence [SEP]
    fn frame(&self, prefix: &[u32], specials: &SpecialIds) -> ModelInput {
        let mut ids = Vec::with_capacity(prefix.len() + self.sentence_tokens.len() + 3);
        ids.extend(specials.cls);
        ids.extend_from_slice(prefix);
        ids.extend(specials.sep);
        let mut segments = vec![0; ids.len()];
        let sentence_start = ids.len();
        ids.extend_from_slice(&self.sentence_tokens);
        ids.extend(specials.sep);
        segments.resize(ids.len(), 1);
        let masked = self
            .masked_positions
            .iter()
            .zip(&self.gold_ids)
            .map(|(&p, &gold_id)| MaskedSlot {
                position: sentence_start + p,
                gold_id,
            })
            .collect();
        ModelInput { ids, segments, masked }
    }
}

/// Builds the cloze pair for one sentence and one set of masked positions.
///
/// The filler prefix repeats `filler_id` once per summary token. When the
/// prefix plus sentence plus `special_count` framing tokens exceeds
/// `max_len`, the prefix is cut from its end; the sentence is never cut.
pub fn build_cloze_pair(
    summary_ids: &[u32],
    sentence: &Sentence,
    positions: &[usize],
    mask_id: u32,
    filler_id: u32,
    max_len: usize,
    special_count: usize,
) -> Result<ClozePair, MaskingError> {
    let sentence_len = sentence.tokens.len();
    let budget = max_len
        .checked_sub(sentence_len + special_count)
        .ok_or(MaskingError::SentenceTooLong {
            tokens: sentence_len,
            special: special_count,
            max_len,
        })?;
    let prefix_len = summary_ids.len().min(budget);
    let help_prefix = summary_ids[..prefix_len].to_vec();
    let base_prefix = vec![filler_id; prefix_len];

    let mut sentence_tokens: Vec<u32> = sentence.tokens.iter().map(|t| t.vocab_id).collect();
    let gold_ids = positions.iter().map(|&p| sentence_tokens[p]).collect();
    for &p in positions {
        sentence_tokens[p] = mask_id;
    }
    Ok(ClozePair {
        base_prefix,
        help_prefix,
        sentence_tokens,
        masked_positions: positions.to_vec(),
        gold_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(len: usize, role: WordRole) -> Token {
        Token::new("x".repeat(len), len as u32 + 10, role)
    }

    fn sentence(tokens: Vec<Token>) -> Sentence {
        Sentence {
            tokens,
            source_span: (0, 0),
        }
    }

    #[test]
    fn eligibility_defaults() {
        let p = MaskingPolicy::default();
        assert!(!is_eligible(&Token::new("the", 1, WordRole::WholeWord), &p));
        assert!(is_eligible(&Token::new("blanc", 1, WordRole::WholeWord), &p));
        assert!(is_eligible(&tok(1, WordRole::WordStart), &p));
        assert!(!is_eligible(&tok(4, WordRole::WordContinuation), &p));
    }

    #[test]
    fn gap_six_offset_one() {
        let toks = vec![tok(5, WordRole::WholeWord); 12];
        let p = MaskingPolicy::default();
        assert_eq!(mask_positions(&toks, &p, 1).unwrap(), vec![0, 6]);
        assert_eq!(mask_positions(&toks, &p, 6).unwrap(), vec![5, 11]);
    }

    #[test]
    fn gap_one_masks_every_eligible() {
        let toks = vec![
            tok(5, WordRole::WholeWord),
            tok(2, WordRole::WholeWord),
            tok(5, WordRole::WholeWord),
        ];
        let p = MaskingPolicy::with_gap(1);
        assert_eq!(mask_positions(&toks, &p, 1).unwrap(), vec![0, 2]);
    }

    #[test]
    fn width_skips_ineligible_neighbours() {
        let toks = vec![
            tok(5, WordRole::WholeWord),
            tok(2, WordRole::WholeWord),
            tok(5, WordRole::WholeWord),
            tok(5, WordRole::WholeWord),
            tok(5, WordRole::WholeWord),
        ];
        let p = MaskingPolicy {
            gap: 4,
            mask_width: 3,
            ..MaskingPolicy::default()
        };
        assert_eq!(mask_positions(&toks, &p, 1).unwrap(), vec![0, 2, 4]);
    }

    #[test]
    fn bad_offset_and_policy() {
        let toks = vec![tok(5, WordRole::WholeWord)];
        let p = MaskingPolicy::with_gap(2);
        assert!(matches!(
            mask_positions(&toks, &p, 3),
            Err(MaskingError::InvalidOffset { .. })
        ));
        assert!(mask_positions(&toks, &p, 0).is_err());
        assert!(MaskingPolicy::with_gap(0).validate().is_err());
    }

    #[test]
    fn filler_matches_summary_length() {
        let s = sentence(vec![tok(5, WordRole::WholeWord); 4]);
        let summary: Vec<u32> = (100..110).collect();
        let pair = build_cloze_pair(&summary, &s, &[1, 3], 4, 5, 512, 3).unwrap();
        assert_eq!(pair.base_prefix, vec![5; 10]);
        assert_eq!(pair.help_prefix, summary);
        assert_eq!(pair.sentence_tokens, vec![15, 4, 15, 4]);
        assert_eq!(pair.gold_ids, vec![15, 15]);
    }

    #[test]
    fn empty_summary_gives_identical_inputs() {
        let s = sentence(vec![tok(5, WordRole::WholeWord); 4]);
        let pair = build_cloze_pair(&[], &s, &[0], 4, 5, 512, 3).unwrap();
        let specials = SpecialIds {
            cls: Some(2),
            sep: Some(3),
            mask: 4,
            unk: 1,
            pad: 0,
            filler: 5,
        };
        assert_eq!(pair.base_input(&specials), pair.help_input(&specials));
    }

    #[test]
    fn long_prefix_is_truncated_from_the_end() {
        let s = sentence(vec![tok(5, WordRole::WholeWord); 100]);
        let summary: Vec<u32> = (0..500).collect();
        let pair = build_cloze_pair(&summary, &s, &[0], 4, 5, 512, 3).unwrap();
        assert_eq!(pair.help_prefix.len(), 512 - 100 - 3);
        assert_eq!(pair.help_prefix[..], summary[..409]);
        assert_eq!(pair.base_prefix.len(), 409);
        assert_eq!(pair.sentence_tokens.len(), 100);
    }

    #[test]
    fn sentence_too_long() {
        let s = sentence(vec![tok(5, WordRole::WholeWord); 510]);
        assert_eq!(
            build_cloze_pair(&[], &s, &[0], 4, 5, 512, 3),
            Err(MaskingError::SentenceTooLong {
                tokens: 510,
                special: 3,
                max_len: 512
            })
        );
    }

    #[test]
    fn framing_offsets_masked_positions() {
        let s = sentence(vec![tok(5, WordRole::WholeWord); 3]);
        let pair = build_cloze_pair(&[7, 8], &s, &[2], 4, 5, 64, 3).unwrap();
        let specials = SpecialIds {
            cls: Some(2),
            sep: Some(3),
            mask: 4,
            unk: 1,
            pad: 0,
            filler: 5,
        };
        let help = pair.help_input(&specials);
        assert_eq!(help.ids, vec![2, 7, 8, 3, 15, 15, 4, 3]);
        assert_eq!(help.segments, vec![0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(
            help.masked,
            vec![MaskedSlot {
                position: 6,
                gold_id: 15
            }]
        );
        let base = pair.base_input(&specials);
        assert_eq!(base.ids, vec![2, 5, 5, 3, 15, 15, 4, 3]);
        assert_eq!(base.masked, help.masked);
    }
}
