//! Model vocabulary and tokenizer configuration.
//!
//! A bundle ships `vocab.txt` (one token per line, line number = id) and a
//! `tokenizer.json` of the form
//!
//! ```json
//! {
//!   "lowercase": true,
//!   "max_len": 512,
//!   "special_ids": { "cls": 101, "sep": 102, "mask": 103, "unk": 100, "pad": 0, "filler": 1012 }
//! }
//! ```
//!
//! `cls` and `sep` may be omitted for models trained without sequence markers.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CONTINUATION_PREFIX: &str = "##";
pub const DEFAULT_MAX_CHARS_PER_WORD: usize = 100;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed tokenizer config: {0}")]
    Config(String),
    #[error("special token `{name}` has id {id}, outside the vocabulary of {size} entries")]
    MissingSpecial { name: &'static str, id: u32, size: usize },
    #[error("special tokens `{0}` and `{1}` share an id")]
    SharedSpecial(&'static str, &'static str),
    #[error("vocabulary is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialIds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cls: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sep: Option<u32>,
    pub mask: u32,
    pub unk: u32,
    pub pad: u32,
    /// The period token used to build filler prefixes.
    pub filler: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    /// Defaults to the value of `lowercase`, as in uncased BERT checkpoints.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strip_accents: Option<bool>,
    pub max_len: usize,
    pub special_ids: SpecialIds,
    #[serde(default = "default_prefix")]
    pub continuation_prefix: String,
    #[serde(default = "default_max_chars")]
    pub max_chars_per_word: usize,
}

fn default_prefix() -> String {
    DEFAULT_CONTINUATION_PREFIX.to_string()
}

fn default_max_chars() -> usize {
    DEFAULT_MAX_CHARS_PER_WORD
}

impl TokenizerConfig {
    pub fn strip_accents(&self) -> bool {
        self.strip_accents.unwrap_or(self.lowercase)
    }

    /// Number of framing tokens placed around a `prefix + sentence` input.
    pub fn special_token_count(&self) -> usize {
        // [CLS] prefix [SEP] sentence [SEP]
        usize::from(self.special_ids.cls.is_some()) + 2 * usize::from(self.special_ids.sep.is_some())
    }
}

/// Id/surface table of a masked language model plus its tokenizer settings.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    config: TokenizerConfig,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>, config: TokenizerConfig) -> Result<Self, VocabError> {
        if tokens.is_empty() {
            return Err(VocabError::Empty);
        }
        let size = tokens.len();
        let ids = config.special_ids;
        let mut named: Vec<(&'static str, u32)> = vec![
            ("mask", ids.mask),
            ("unk", ids.unk),
            ("pad", ids.pad),
            ("filler", ids.filler),
        ];
        named.extend(ids.cls.map(|id| ("cls", id)));
        named.extend(ids.sep.map(|id| ("sep", id)));
        for &(name, id) in &named {
            if id as usize >= size {
                return Err(VocabError::MissingSpecial { name, id, size });
            }
        }
        for (a, b) in [("mask", "unk"), ("mask", "filler"), ("unk", "filler")] {
            let lookup = |n: &str| named.iter().find(|(m, _)| *m == n).map(|(_, id)| *id);
            if lookup(a) == lookup(b) {
                return Err(VocabError::SharedSpecial(a, b));
            }
        }

        let mut index = HashMap::with_capacity(size);
        for (id, tok) in tokens.iter().enumerate() {
            // a repeated token maps to its last line, as in the reference
            // WordPiece implementation
            index.insert(tok.clone(), id as u32);
        }
        Ok(Self { tokens, index, config })
    }

    pub fn from_files(vocab_path: &Path, config_path: &Path) -> Result<Self, VocabError> {
        let tokens = read_vocab_file(vocab_path)?;
        let raw = fs::read_to_string(config_path).map_err(|source| VocabError::Io {
            path: config_path.display().to_string(),
            source,
        })?;
        let config: TokenizerConfig = serde_json::from_str(&raw).map_err(|e| VocabError::Config(e.to_string()))?;
        Self::new(tokens, config)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn config(&self) -> &TokenizerConfig {
        &self.config
    }

    pub fn special_ids(&self) -> SpecialIds {
        self.config.special_ids
    }

    pub fn mask_id(&self) -> u32 {
        self.config.special_ids.mask
    }

    pub fn unk_id(&self) -> u32 {
        self.config.special_ids.unk
    }

    pub fn filler_id(&self) -> u32 {
        self.config.special_ids.filler
    }

    pub fn pad_id(&self) -> u32 {
        self.config.special_ids.pad
    }

    pub fn max_len(&self) -> usize {
        self.config.max_len
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.config.continuation_prefix
    }
}

pub fn read_vocab_file(path: &Path) -> Result<Vec<String>, VocabError> {
    let raw = fs::read_to_string(path).map_err(|source| VocabError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut tokens: Vec<String> = raw
        .split('\n')
        .map(|line| line.strip_suffix('\r').unwrap_or(line).to_string())
        .collect();
    // trailing newline
    if tokens.last().is_some_and(|t| t.is_empty()) {
        tokens.pop();
    }
    if tokens.is_empty() {
        return Err(VocabError::Empty);
    }
    Ok(tokens)
}
