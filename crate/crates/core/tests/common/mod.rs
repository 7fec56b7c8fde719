#![allow(dead_code)]

use std::path::PathBuf;

use blanc::PairInput;
use serde::Deserialize;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[derive(Deserialize)]
struct Pair {
    id: String,
    document: String,
    summary: String,
}

pub fn fixture_pairs() -> Vec<PairInput> {
    std::fs::read_to_string(fixture("news_pairs.jsonl"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let p: Pair = serde_json::from_str(l).unwrap();
            PairInput::new(p.id, p.document, p.summary)
        })
        .collect()
}

/// 50 (pair, gap) cases: the 20 own summaries at gap 6, the same pairs
/// with the next pair's summary at gap 2, and 10 own summaries at gap 3.
pub fn scoring_fixtures() -> Vec<(PairInput, usize)> {
    let pairs = fixture_pairs();
    let n = pairs.len();
    let mut out: Vec<(PairInput, usize)> = pairs.iter().map(|p| (p.clone(), 6)).collect();
    for (i, p) in pairs.iter().enumerate() {
        let other = &pairs[(i + 1) % n];
        out.push((
            PairInput::new(format!("{}x", p.id), p.document.clone(), other.summary.clone()),
            2,
        ));
    }
    out.extend(pairs.iter().take(10).map(|p| (p.clone(), 3)));
    out
}
