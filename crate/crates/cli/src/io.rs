use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use blanc::analysis::{AnnotationRecord, AnnotationSet, ErrorAnnotationSet, ErrorRecord, Quality, MAX_RATING};
use blanc::PairInput;
use serde::{Deserialize, Serialize};

pub const SCORE_SCHEMA: &str = "blanc.score.v1";
pub const SWAP_SCHEMA: &str = "blanc.swap.v1";
pub const SWEEP_SCHEMA: &str = "blanc.sweep.v1";
pub const SPLITS_SCHEMA: &str = "blanc.splits.v1";
pub const SPLIT_SUMMARY_SCHEMA: &str = "blanc.split_summary.v1";
pub const SWAP_SUMMARY_SCHEMA: &str = "blanc.swap_summary.v1";
pub const ERROR_CORR_SCHEMA: &str = "blanc.error_corr.v1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRecord {
    id: String,
    document: String,
    summary: String,
}

/// One line of a pairs file: a usable pair or the reason it was rejected.
#[derive(Debug)]
pub enum PairLine {
    Pair(PairInput),
    Invalid {
        line: usize,
        id: Option<String>,
        error: String,
    },
}

/// Reads a JSONL pairs file. Malformed lines and repeated ids are returned
/// as `Invalid` entries rather than errors; only IO failures are fatal.
pub fn read_pairs(path: &Path) -> Result<Vec<PairLine>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line_no = k + 1;
        let text = line.with_context(|| format!("{}:{line_no}: unreadable line", path.display()))?;
        if text.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PairRecord>(&text) {
            Ok(r) if !seen.insert(r.id.clone()) => out.push(PairLine::Invalid {
                line: line_no,
                error: format!("duplicate pair id `{}`", r.id),
                id: Some(r.id),
            }),
            Ok(r) => out.push(PairLine::Pair(PairInput::new(r.id, r.document, r.summary))),
            Err(e) => out.push(PairLine::Invalid {
                line: line_no,
                id: salvage_id(&text),
                error: format!("malformed pair record: {e}"),
            }),
        }
    }
    Ok(out)
}

fn salvage_id(text: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(text).ok()?;
    value.get("id")?.as_str().map(str::to_string)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn pairs_only(lines: &[PairLine]) -> Vec<PairInput> {
    lines
        .iter()
        .filter_map(|l| match l {
            PairLine::Pair(pair) => Some(pair.clone()),
            PairLine::Invalid { .. } => None,
        })
        .collect()
}

pub fn report_invalid(lines: &[PairLine], path: &Path) -> usize {
    let mut n = 0;
    for l in lines {
        if let PairLine::Invalid { line, error, .. } = l {
            eprintln!("{}:{line}: {error}", path.display());
            n += 1;
        }
    }
    n
}

#[derive(Debug, Deserialize)]
struct AnnotationRow {
    pair_id: String,
    annotator_id: String,
    quality: String,
    score: String,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))
}

fn check_header(reader: &mut csv::Reader<File>, path: &Path, required: &[&str]) -> Result<()> {
    let header = reader
        .headers()
        .with_context(|| format!("{}:1: unreadable header", path.display()))?;
    let missing: Vec<&str> = required
        .iter()
        .copied()
        .filter(|c| !header.iter().any(|h| h == *c))
        .collect();
    if !missing.is_empty() {
        bail!(
            "{}:1: header is missing column(s) {} (expected {})",
            path.display(),
            missing.join(", "),
            required.join(",")
        );
    }
    Ok(())
}

fn row_line(record: &csv::StringRecord, fallback: usize) -> u64 {
    record.position().map_or(fallback as u64, |p| p.line())
}

/// Reads an annotation CSV with header `pair_id,annotator_id,quality,score`.
pub fn read_annotations(path: &Path) -> Result<AnnotationSet> {
    let mut reader = csv_reader(path)?;
    check_header(&mut reader, path, &["pair_id", "annotator_id", "quality", "score"])?;
    let header = reader.headers()?.clone();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (k, raw) in reader.records().enumerate() {
        let raw = raw.map_err(|e| anyhow!("{}: {e}", path.display()))?;
        let line = row_line(&raw, k + 2);
        let at = |msg: String| anyhow!("{}:{line}: {msg}", path.display());
        let row: AnnotationRow = raw.deserialize(Some(&header)).map_err(|e| at(e.to_string()))?;
        let quality: Quality = row.quality.parse().map_err(at)?;
        let score: u8 = row
            .score
            .parse()
            .ok()
            .filter(|s| *s <= MAX_RATING)
            .ok_or_else(|| at(format!("score `{}` is not an integer in 0..={MAX_RATING}", row.score)))?;
        if row.pair_id.is_empty() || row.annotator_id.is_empty() {
            return Err(at("empty pair_id or annotator_id".into()));
        }
        if !seen.insert((row.pair_id.clone(), row.annotator_id.clone(), quality)) {
            return Err(at(format!(
                "duplicate rating by `{}` for pair `{}` ({quality})",
                row.annotator_id, row.pair_id
            )));
        }
        records.push(AnnotationRecord {
            pair_id: row.pair_id,
            annotator_id: row.annotator_id,
            quality,
            score,
        });
    }
    if records.is_empty() {
        bail!("{}: no annotation rows", path.display());
    }
    AnnotationSet::new(records).map_err(|e| anyhow!("{}: {e}", path.display()))
}

#[derive(Debug, Deserialize)]
struct ErrorRow {
    pair_id: String,
    annotator_id: String,
    error_type: String,
    #[serde(default)]
    span_start: Option<usize>,
    #[serde(default)]
    span_end: Option<usize>,
}

/// Reads a factual-error CSV with header
/// `pair_id,annotator_id,error_type[,span_start,span_end]`.
pub fn read_errors(path: &Path) -> Result<ErrorAnnotationSet> {
    let mut reader = csv_reader(path)?;
    check_header(&mut reader, path, &["pair_id", "annotator_id", "error_type"])?;
    let header = reader.headers()?.clone();
    let mut records = Vec::new();
    for (k, raw) in reader.records().enumerate() {
        let raw = raw.map_err(|e| anyhow!("{}: {e}", path.display()))?;
        let line = row_line(&raw, k + 2);
        let at = |msg: String| anyhow!("{}:{line}: {msg}", path.display());
        let row: ErrorRow = raw.deserialize(Some(&header)).map_err(|e| at(e.to_string()))?;
        let error_type = row.error_type.parse().map_err(at)?;
        let span = match (row.span_start, row.span_end) {
            (Some(s), Some(e)) if s <= e => Some((s, e)),
            (None, None) => None,
            _ => return Err(at("span_start and span_end must both be set, start <= end".into())),
        };
        records.push(ErrorRecord {
            pair_id: row.pair_id,
            annotator_id: row.annotator_id,
            error_type,
            span,
        });
    }
    Ok(ErrorAnnotationSet::new(records))
}

#[derive(Debug, Deserialize)]
struct ScoreLine {
    #[serde(default)]
    schema: Option<String>,
    id: Option<String>,
    #[serde(default)]
    score: Option<f64>,
}

/// Reads the JSONL written by `blanc score`. Error records are skipped.
pub fn read_scores(path: &Path) -> Result<BTreeMap<String, f64>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut scores = BTreeMap::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line_no = k + 1;
        let at = |msg: String| anyhow!("{}:{line_no}: {msg}", path.display());
        let text = line.map_err(|e| at(e.to_string()))?;
        if text.trim().is_empty() {
            continue;
        }
        let rec: ScoreLine = serde_json::from_str(&text).map_err(|e| at(e.to_string()))?;
        if let Some(schema) = rec.schema.as_deref() {
            if schema != SCORE_SCHEMA {
                return Err(at(format!("unsupported schema `{schema}`, expected `{SCORE_SCHEMA}`")));
            }
        }
        let (Some(id), Some(score)) = (rec.id, rec.score) else {
            continue;
        };
        if scores.insert(id.clone(), score).is_some() {
            return Err(at(format!("duplicate score for pair `{id}`")));
        }
    }
    Ok(scores)
}

pub fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Output for secondary tables: the given file, or stderr.
pub fn side_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stderr()),
    })
}

pub fn write_jsonl<T: Serialize>(out: &mut dyn Write, record: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// CSV writer that quotes every non-numeric field, preceded by a
/// `# schema=` comment line.
pub fn csv_writer<'a>(out: &'a mut dyn Write, schema: &str) -> Result<csv::Writer<&'a mut dyn Write>> {
    writeln!(out, "# schema={schema}")?;
    Ok(csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_writer(out))
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn parse_list(raw: &str) -> Result<Vec<usize>> {
    let values: Vec<usize> = raw
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().with_context(|| format!("`{s}` is not a positive integer")))
        .collect::<Result<_>>()?;
    if values.is_empty() || values.contains(&0) {
        bail!("expected a comma-separated list of positive integers, got `{raw}`");
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_list("2, 6").unwrap(), vec![2, 6]);
        assert!(parse_list("").is_err());
        assert!(parse_list("1,0").is_err());
        assert!(parse_list("x").is_err());
    }

    #[test]
    fn pairs_with_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"id\":\"a\",\"document\":\"D.\",\"summary\":\"S.\"}\n",
                "\n",
                "{\"id\":\"b\",\"document\":null,\"summary\":\"S.\"}\n",
                "not json\n",
                "{\"id\":\"a\",\"document\":\"D.\",\"summary\":\"\"}\n",
            ),
        )
        .unwrap();
        let lines = read_pairs(&path).unwrap();
        assert_eq!(lines.len(), 4);
        assert!(matches!(&lines[0], PairLine::Pair(p) if p.id == "a"));
        assert!(matches!(&lines[1], PairLine::Invalid { line: 3, id: Some(id), .. } if id == "b"));
        assert!(matches!(&lines[2], PairLine::Invalid { line: 4, id: None, .. }));
        assert!(matches!(&lines[3], PairLine::Invalid { line: 5, error, .. } if error.contains("duplicate")));
        assert_eq!(pairs_only(&lines).len(), 1);
    }
}
