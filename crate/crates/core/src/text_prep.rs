//! Sentence segmentation and WordPiece tokenization.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::vocab::Vocabulary;

const DEFAULT_ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

/// Byte offsets `[start, end)` into the source text.
pub type Span = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordRole {
    WholeWord,
    WordStart,
    WordContinuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// Piece text without the continuation marker.
    pub surface: String,
    pub vocab_id: u32,
    pub char_length: usize,
    pub word_role: WordRole,
}

impl Token {
    pub fn new(surface: impl Into<String>, vocab_id: u32, word_role: WordRole) -> Self {
        let surface = surface.into();
        let char_length = surface.chars().count();
        Self {
            surface,
            vocab_id,
            char_length,
            word_role,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub source_span: Span,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Rule-based splitter: terminal punctuation followed by whitespace and a
/// sentence-opening character, unless the period closes a known
/// abbreviation or a single-letter initial. A blank line always ends a
/// sentence.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::from_list(DEFAULT_ABBREVIATIONS)
    }
}

impl SentenceSplitter {
    /// Parses an abbreviation list: one entry per line, case-insensitive,
    /// trailing period optional. Blank lines and `#` comments are ignored.
    pub fn from_list(list: &str) -> Self {
        let abbreviations = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.trim_end_matches('.').to_lowercase())
            .collect();
        Self { abbreviations }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::from_list(&fs::read_to_string(path)?))
    }

    pub fn is_abbreviation(&self, word: &str) -> bool {
        self.abbreviations.contains(&word.trim_end_matches('.').to_lowercase())
    }

    pub fn split<'a>(&self, document: &'a str) -> Vec<(&'a str, Span)> {
        let chars: Vec<(usize, char)> = document.char_indices().collect();
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        let mut i = 0;

        let push = |from: usize, to: usize, out: &mut Vec<(&'a str, Span)>| {
            let piece = &document[from..to];
            let trimmed_end = from + piece.trim_end().len();
            if trimmed_end > from {
                out.push((&document[from..trimmed_end], (from, trimmed_end)));
            }
        };

        while i < chars.len() {
            let (pos, c) = chars[i];
            if start.is_none() {
                if !c.is_whitespace() {
                    start = Some(pos);
                }
                i += 1;
                continue;
            }
            let sent_start = start.unwrap();

            if c == '\n' && blank_line_follows(&chars, i) {
                push(sent_start, pos, &mut out);
                start = None;
                i += 1;
                continue;
            }

            if is_terminal(c) {
                let run_start = i;
                let mut j = i;
                while j < chars.len() && is_terminal(chars[j].1) {
                    j += 1;
                }
                while j < chars.len() && is_closing(chars[j].1) {
                    j += 1;
                }
                let end_byte = chars.get(j).map_or(document.len(), |&(p, _)| p);
                let boundary = if j == chars.len() {
                    true
                } else if !chars[j].1.is_whitespace() {
                    false
                } else {
                    let next = chars[j..].iter().find(|(_, ch)| !ch.is_whitespace());
                    match next {
                        None => true,
                        Some(&(_, ch)) if !opens_sentence(ch) => false,
                        Some(_) => {
                            let lone_period = c == '.' && j - run_start >= 1 && {
                                let run = &chars[run_start..j];
                                run.iter().filter(|(_, ch)| is_terminal(*ch)).count() == 1
                            };
                            !(lone_period && self.closes_abbreviation(document, sent_start, pos))
                        }
                    }
                };
                if boundary {
                    push(sent_start, end_byte, &mut out);
                    start = None;
                }
                i = j;
                continue;
            }
            i += 1;
        }
        if let Some(s) = start {
            push(s, document.len(), &mut out);
        }
        out
    }

    /// Whether the period at byte `period` terminates an abbreviation or an
    /// initial rather than a sentence.
    fn closes_abbreviation(&self, document: &str, sent_start: usize, period: usize) -> bool {
        let before = &document[sent_start..period];
        let word_start = before
            .rfind(|c: char| c.is_whitespace() || is_opening(c))
            .map_or(0, |p| p + before[p..].chars().next().unwrap().len_utf8());
        let word = &before[word_start..];
        if word.is_empty() {
            return false;
        }
        let mut letters = word.chars();
        let single_initial = matches!((letters.next(), letters.next()), (Some(c), None) if c.is_uppercase());
        single_initial || self.is_abbreviation(word)
    }
}

fn blank_line_follows(chars: &[(usize, char)], newline: usize) -> bool {
    for &(_, c) in &chars[newline + 1..] {
        if c == '\n' {
            return true;
        }
        if !c.is_whitespace() {
            return false;
        }
    }
    false
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | '”' | '’' | ')' | ']' | '}' | '»')
}

fn is_opening(c: char) -> bool {
    matches!(c, '"' | '\'' | '“' | '‘' | '(' | '[' | '{' | '«')
}

fn opens_sentence(c: char) -> bool {
    c.is_uppercase() || c.is_numeric() || is_opening(c) || !c.is_alphabetic() && !c.is_ascii_punctuation()
}

fn default_splitter() -> &'static SentenceSplitter {
    static SPLITTER: OnceLock<SentenceSplitter> = OnceLock::new();
    SPLITTER.get_or_init(SentenceSplitter::default)
}

/// Splits a document into trimmed sentences with their byte spans, using
/// the built-in abbreviation list.
pub fn split_sentences(document: &str) -> Vec<(String, Span)> {
    default_splitter()
        .split(document)
        .into_iter()
        .map(|(s, span)| (s.to_string(), span))
        .collect()
}

/// Greedy longest-match WordPiece tokenization following the BERT basic
/// tokenizer conventions (whitespace and punctuation splitting, optional
/// lowercasing and accent stripping).
pub fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<Token> {
    let config = vocab.config();
    let mut tokens = Vec::new();
    for word in basic_words(text, config.lowercase, config.strip_accents()) {
        wordpiece(&word, vocab, &mut tokens);
    }
    tokens
}

/// Tokenizes every sentence of a document, dropping sentences that yield no
/// tokens.
pub fn prepare_document(document: &str, vocab: &Vocabulary) -> Vec<Sentence> {
    default_splitter()
        .split(document)
        .into_iter()
        .filter_map(|(text, span)| {
            let tokens = tokenize(text, vocab);
            (!tokens.is_empty()).then_some(Sentence {
                tokens,
                source_span: span,
            })
        })
        .collect()
}

fn basic_words(text: &str, lowercase: bool, strip_accents: bool) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for c in text.chars() {
        if c == '\0' || c == '\u{fffd}' || is_control(c) {
            continue;
        }
        if is_chinese_char(c) {
            cleaned.push(' ');
            cleaned.push(c);
            cleaned.push(' ');
        } else if c.is_whitespace() {
            cleaned.push(' ');
        } else {
            cleaned.push(c);
        }
    }

    let mut words = Vec::new();
    for raw in cleaned.split_whitespace() {
        let mut word = if lowercase { raw.to_lowercase() } else { raw.to_string() };
        if strip_accents {
            word = word.nfd().filter(|c| !is_combining_mark(*c)).collect();
        }
        let mut current = String::new();
        for c in word.chars() {
            if is_punctuation(c) {
                if !current.is_empty() {
                    words.push(std::mem::take(&mut current));
                }
                words.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words
}

fn wordpiece(word: &str, vocab: &Vocabulary, out: &mut Vec<Token>) {
    let chars: Vec<char> = word.chars().collect();
    let unknown = |out: &mut Vec<Token>| {
        out.push(Token::new(word, vocab.unk_id(), WordRole::WholeWord));
    };
    if chars.len() > vocab.config().max_chars_per_word {
        unknown(out);
        return;
    }

    let prefix = vocab.continuation_prefix();
    let mut pieces: Vec<(String, u32)> = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while start < end {
            let piece: String = chars[start..end].iter().collect();
            let key = if start > 0 {
                format!("{prefix}{piece}")
            } else {
                piece.clone()
            };
            if let Some(id) = vocab.id(&key) {
                found = Some((piece, id));
                break;
            }
            end -= 1;
        }
        match found {
            Some(p) => pieces.push(p),
            None => {
                unknown(out);
                return;
            }
        }
        start = end;
    }

    if pieces.len() == 1 {
        let (surface, id) = pieces.pop().unwrap();
        out.push(Token::new(surface, id, WordRole::WholeWord));
        return;
    }
    for (k, (surface, id)) in pieces.into_iter().enumerate() {
        let role = if k == 0 {
            WordRole::WordStart
        } else {
            WordRole::WordContinuation
        };
        out.push(Token::new(surface, id, role));
    }
}

fn is_control(c: char) -> bool {
    if matches!(c, '\t' | '\n' | '\r') {
        return false;
    }
    c.is_control()
        || matches!(c, '\u{200b}'..='\u{200f}' | '\u{2028}'..='\u{202e}' | '\u{2060}'..='\u{2064}' | '\u{feff}')
}

fn is_chinese_char(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F
        | 0x2B820..=0x2CEAF
        | 0xF900..=0xFAFF
        | 0x2F800..=0x2FA1F)
}

/// ASCII symbol ranges plus the common Unicode punctuation blocks.
fn is_punctuation(c: char) -> bool {
    if c.is_ascii_punctuation() {
        return true;
    }
    matches!(c as u32,
        0x00A1 | 0x00A7 | 0x00AB | 0x00B6 | 0x00B7 | 0x00BB | 0x00BF
        | 0x2010..=0x2027
        | 0x2030..=0x2043
        | 0x2045..=0x2051
        | 0x2053..=0x205E
        | 0x3001..=0x3003
        | 0x3008..=0x3011
        | 0xFF01..=0xFF03
        | 0xFF05..=0xFF0A
        | 0xFF0C..=0xFF0F)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{SpecialIds, TokenizerConfig};

    fn vocab(extra: &[&str]) -> Vocabulary {
        let mut tokens: Vec<String> = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "."]
            .iter()
            .map(|s| s.to_string())
            .collect();
        tokens.extend(extra.iter().map(|s| s.to_string()));
        Vocabulary::new(
            tokens,
            TokenizerConfig {
                lowercase: true,
                strip_accents: None,
                max_len: 64,
                special_ids: SpecialIds {
                    cls: Some(2),
                    sep: Some(3),
                    mask: 4,
                    unk: 1,
                    pad: 0,
                    filler: 5,
                },
                continuation_prefix: "##".into(),
                max_chars_per_word: 100,
            },
        )
        .unwrap()
    }

    #[test]
    fn empty_document() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   \n\t ").is_empty());
    }

    #[test]
    fn single_sentence() {
        assert_eq!(
            split_sentences("One sentence."),
            vec![("One sentence.".to_string(), (0, 13))]
        );
    }

    #[test]
    fn abbreviation_is_not_a_boundary() {
        let s = split_sentences("Dr. Smith left. He returned.");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].0, "Dr. Smith left.");
        assert_eq!(s[1].0, "He returned.");
        assert_eq!(s[1].1, (16, 28));
    }

    #[test]
    fn quotes_and_initials() {
        let s = split_sentences("He said \"Stop.\" Then J. K. Rowling waved! Done?");
        let texts: Vec<_> = s.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(texts, ["He said \"Stop.\"", "Then J. K. Rowling waved!", "Done?"]);
    }

    #[test]
    fn blank_line_ends_sentence() {
        let s = split_sentences("Headline without period\n\nBody text here.");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].0, "Headline without period");
    }

    #[test]
    fn decimals_and_lowercase_continuations() {
        let s = split_sentences("It rose 3.5 percent. e.g. this is odd... but continues. End.");
        let texts: Vec<_> = s.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(
            texts,
            ["It rose 3.5 percent. e.g. this is odd... but continues.", "End."]
        );
    }

    #[test]
    fn in_vocab_word_is_whole() {
        let v = vocab(&["the"]);
        let toks = tokenize("The", &v);
        assert_eq!(toks, vec![Token::new("the", 6, WordRole::WholeWord)]);
        assert_eq!(toks[0].char_length, 3);
    }

    #[test]
    fn oov_word_is_split() {
        let v = vocab(&["blanc", "##if", "##y", "##i"]);
        let toks = tokenize("blancify", &v);
        let roles: Vec<_> = toks.iter().map(|t| t.word_role).collect();
        assert_eq!(
            roles,
            [
                WordRole::WordStart,
                WordRole::WordContinuation,
                WordRole::WordContinuation
            ]
        );
        let surfaces: Vec<_> = toks.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, ["blanc", "if", "y"]);
        assert_eq!(toks[1].char_length, 2);
    }

    #[test]
    fn unknown_word_maps_to_unk() {
        let v = vocab(&["a"]);
        let toks = tokenize("a zebra", &v);
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[1].vocab_id, v.unk_id());
        assert_eq!(toks[1].word_role, WordRole::WholeWord);
        assert_eq!(toks[1].surface, "zebra");
    }

    #[test]
    fn punctuation_and_accents() {
        let v = vocab(&["cafe", ",", "ok", "!"]);
        let toks = tokenize("Café, OK!", &v);
        let surfaces: Vec<_> = toks.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, ["cafe", ",", "ok", "!"]);
        assert!(toks.iter().all(|t| t.word_role == WordRole::WholeWord));
    }

    #[test]
    fn prepare_document_drops_empty_sentences() {
        let v = vocab(&["a"]);
        let sents = prepare_document("A. \u{200b}\n\nA.", &v);
        assert_eq!(sents.len(), 2);
        assert_eq!(sents[0].tokens.len(), 2);
    }
}
