//! Data model, tokenization and file I/O for labelled datasets and
//! parallel clean/noisy corpora.
//!
//! The tokenization unit is the Unicode scalar value. In byte-faithful
//! mode whitespace scalars are kept as ordinary tokens and
//! `detokenize(tokenize(t)) == t`; compact mode drops whitespace.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, LineIssue, Result};

/// One tokenization unit: a single Unicode scalar value.
///
/// The epsilon sentinel used by the alignment machinery is a separate
/// enum variant over there, so no corpus token can ever collide with it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub char);

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizerMode {
    /// Keep every scalar, whitespace included; round-trips exactly.
    ByteFaithful,
    /// Drop whitespace scalars.
    Compact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tokenizer {
    pub mode: TokenizerMode,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer { mode: TokenizerMode::ByteFaithful }
    }
}

impl Tokenizer {
    pub fn new(mode: TokenizerMode) -> Self {
        Tokenizer { mode }
    }

    pub fn tokenize(&self, text: &str) -> Vec<Token> {
        text.chars()
            .filter(|c| self.mode == TokenizerMode::ByteFaithful || !c.is_whitespace())
            .map(Token)
            .collect()
    }

    pub fn sentence(&self, text: &str, label: Option<u8>, id: u64) -> Sentence {
        Sentence { tokens: self.tokenize(text), label, id }
    }
}

pub fn detokenize(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.0).collect()
}

/// A tokenized text with an optional binary label and a stable id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub label: Option<u8>,
    pub id: u64,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>, label: Option<u8>, id: u64) -> Self {
        Sentence { tokens, label, id }
    }

    pub fn text(&self) -> String {
        detokenize(&self.tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A clean sentence and its noisy transcript; carries no task labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPair {
    pub clean: Sentence,
    pub noisy: Sentence,
}

/// A labelled dataset; ids are always the positions 0..N-1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetStats {
    pub sentences: usize,
    pub positives: usize,
    pub mean_len: f64,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} sentences, {} positives, mean length {:.1}",
            self.sentences, self.positives, self.mean_len
        )
    }
}

impl Dataset {
    pub fn new(name: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        Dataset { name: name.into(), sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn stats(&self) -> DatasetStats {
        let total_tokens: usize = self.sentences.iter().map(Sentence::len).sum();
        DatasetStats {
            sentences: self.len(),
            positives: self.sentences.iter().filter(|s| s.label == Some(1)).count(),
            mean_len: if self.sentences.is_empty() {
                0.0
            } else {
                total_tokens as f64 / self.sentences.len() as f64
            },
        }
    }

    /// Sorted, deduplicated token alphabet of the dataset.
    pub fn vocab(&self) -> Vec<Token> {
        let mut v: Vec<Token> = self.sentences.iter().flat_map(|s| s.tokens.iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Checks the dataset invariants: ids are exactly 0..N-1 in order and
    /// every sentence is labelled.
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.sentences.iter().enumerate() {
            if s.id != i as u64 {
                return Err(Error::data(format!(
                    "dataset {}: sentence at position {i} has id {}",
                    self.name, s.id
                )));
            }
            if s.label.is_none() {
                return Err(Error::data(format!("dataset {}: sentence {i} has no label", self.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Jsonl,
    Tsv,
}

impl DataFormat {
    /// Guesses the format from a file extension; jsonl when unknown.
    pub fn from_path(path: &Path) -> DataFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => DataFormat::Tsv,
            _ => DataFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct JsonlRow {
    text: String,
    label: i64,
}

#[derive(Serialize)]
struct JsonlRowOut<'a> {
    text: &'a str,
    label: u8,
}

fn parse_label(raw: i64, line: usize, issues: &mut Vec<LineIssue>) -> Option<u8> {
    match raw {
        0 => Some(0),
        1 => Some(1),
        other => {
            issues.push(LineIssue { line, reason: format!("non-binary label {other}") });
            None
        }
    }
}

fn parse_dataset(content: &str, format: DataFormat, tokenizer: &Tokenizer, name: &str) -> (Vec<Sentence>, Vec<LineIssue>) {
    let mut sentences = Vec::new();
    let mut issues = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let lineno = idx + 1;
        match format {
            DataFormat::Jsonl => match serde_json::from_str::<JsonlRow>(line) {
                Ok(row) => {
                    if let Some(label) = parse_label(row.label, lineno, &mut issues) {
                        sentences.push(tokenizer.sentence(&row.text, Some(label), sentences.len() as u64));
                    }
                }
                Err(e) => issues.push(LineIssue { line: lineno, reason: format!("bad record: {e}") }),
            },
            DataFormat::Tsv => {
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != 2 {
                    issues.push(LineIssue {
                        line: lineno,
                        reason: format!("expected 2 tab-separated fields, found {}", fields.len()),
                    });
                    continue;
                }
                match fields[1].trim().parse::<i64>() {
                    Ok(raw) => {
                        if let Some(label) = parse_label(raw, lineno, &mut issues) {
                            sentences.push(tokenizer.sentence(fields[0], Some(label), sentences.len() as u64));
                        }
                    }
                    Err(_) => issues.push(LineIssue { line: lineno, reason: format!("bad label {:?}", fields[1]) }),
                }
            }
        }
    }
    let _ = name;
    (sentences, issues)
}

/// Loads a labelled dataset from jsonl (`{"text":…,"label":0|1}`) or
/// 2-column tsv (`text<TAB>label`). Every malformed line is reported.
pub fn load_dataset(path: &Path, format: DataFormat, tokenizer: &Tokenizer) -> Result<Dataset> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    let (sentences, issues) = parse_dataset(&content, format, tokenizer, &name);
    if !issues.is_empty() {
        return Err(Error::malformed(path, issues));
    }
    Ok(Dataset::new(name, sentences))
}

fn parse_parallel(content: &str, tokenizer: &Tokenizer) -> (Vec<ParallelPair>, Vec<LineIssue>) {
    let mut pairs = Vec::new();
    let mut issues = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let lineno = idx + 1;
        let tabs = line.matches('\t').count();
        if tabs != 1 {
            issues.push(LineIssue { line: lineno, reason: format!("expected exactly one TAB, found {tabs}") });
            continue;
        }
        let (clean_text, noisy_text) = line.split_once('\t').expect("one tab");
        let id = pairs.len() as u64;
        let clean = tokenizer.sentence(clean_text, None, id);
        let noisy = tokenizer.sentence(noisy_text, None, id);
        if clean.is_empty() || noisy.is_empty() {
            issues.push(LineIssue { line: lineno, reason: "empty side in pair".to_string() });
            continue;
        }
        pairs.push(ParallelPair { clean, noisy });
    }
    (pairs, issues)
}

/// Loads a parallel corpus of `clean<TAB>noisy` lines.
pub fn load_parallel(path: &Path, tokenizer: &Tokenizer) -> Result<Vec<ParallelPair>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (pairs, issues) = parse_parallel(&content, tokenizer);
    if !issues.is_empty() {
        return Err(Error::malformed(path, issues));
    }
    Ok(pairs)
}

pub fn save_dataset_jsonl(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for s in &dataset.sentences {
        let text = s.text();
        let row = JsonlRowOut {
            text: &text,
            label: s.label.ok_or_else(|| Error::data(format!("sentence {} has no label", s.id)))?,
        };
        let line = serde_json::to_string(&row).expect("serializable row");
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

pub fn save_parallel_tsv(pairs: &[ParallelPair], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for p in pairs {
        writeln!(out, "{}\t{}", p.clean.text(), p.noisy.text()).expect("write to vec");
    }
    write_atomic(path, &out)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
