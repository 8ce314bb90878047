//! Levenshtein alignment of parallel sentences and estimation of the
//! token-level confusion matrix.
//!
//! The matrix vocabulary carries an out-of-band epsilon symbol: sampling a
//! token from the epsilon row models insertion and sampling epsilon from a
//! token row models deletion. Epsilon is an enum variant, not a token, so
//! it can never collide with corpus text; its serialized form is the
//! multi-character marker `<eps>`, which no single-scalar token can equal.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::corpus::{write_atomic, ParallelPair, Sentence, Token};
use crate::error::{Error, Result};

/// Serialized form of the epsilon symbol. Multi-character on purpose:
/// corpus tokens are single Unicode scalars and can never equal it.
pub const EPS_MARKER: &str = "<eps>";

/// A symbol in the confusion-matrix vocabulary: a corpus token or epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sym {
    Tok(Token),
    Eps,
}

impl Sym {
    pub fn is_eps(self) -> bool {
        matches!(self, Sym::Eps)
    }

    pub fn token(self) -> Option<Token> {
        match self {
            Sym::Tok(t) => Some(t),
            Sym::Eps => None,
        }
    }
}

impl Ord for Sym {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Sym::Tok(a), Sym::Tok(b)) => a.cmp(b),
            (Sym::Tok(_), Sym::Eps) => Ordering::Less,
            (Sym::Eps, Sym::Tok(_)) => Ordering::Greater,
            (Sym::Eps, Sym::Eps) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Sym {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sym::Tok(t) => write!(f, "{t}"),
            Sym::Eps => write!(f, "{EPS_MARKER}"),
        }
    }
}

/// One step of an alignment between a clean and a noisy token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match(Token),
    Substitute(Token, Token),
    Delete(Token),
    Insert(Token),
}

impl EditOp {
    pub fn is_match(self) -> bool {
        matches!(self, EditOp::Match(_))
    }
}

/// A minimal-cost edit script from the clean side to the noisy side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentPath {
    pub ops: Vec<EditOp>,
    pub cost: usize,
}

impl AlignmentPath {
    /// Replays the ops against a clean sequence, producing the noisy one.
    /// Fails if the script does not fit the sequence.
    pub fn replay(&self, clean: &[Token]) -> Result<Vec<Token>> {
        let mut out = Vec::with_capacity(clean.len());
        let mut pos = 0usize;
        for op in &self.ops {
            match *op {
                EditOp::Match(w) => {
                    if clean.get(pos) != Some(&w) {
                        return Err(Error::data(format!("replay mismatch at position {pos}")));
                    }
                    out.push(w);
                    pos += 1;
                }
                EditOp::Substitute(w, w2) => {
                    if clean.get(pos) != Some(&w) {
                        return Err(Error::data(format!("replay mismatch at position {pos}")));
                    }
                    out.push(w2);
                    pos += 1;
                }
                EditOp::Delete(w) => {
                    if clean.get(pos) != Some(&w) {
                        return Err(Error::data(format!("replay mismatch at position {pos}")));
                    }
                    pos += 1;
                }
                EditOp::Insert(w2) => out.push(w2),
            }
        }
        if pos != clean.len() {
            return Err(Error::data("replay did not consume the whole clean side"));
        }
        Ok(out)
    }
}

/// Aligns two token sequences under unit edit costs.
///
/// Ties during backtrace are broken deterministically by preferring the
/// diagonal step (match/substitute) over delete over insert.
pub fn levenshtein_align(clean: &Sentence, noisy: &Sentence) -> AlignmentPath {
    align_tokens(&clean.tokens, &noisy.tokens)
}

fn align_tokens(a: &[Token], b: &[Token]) -> AlignmentPath {
    let n = a.len();
    let m = b.len();
    let width = m + 1;
    let mut dp = vec![0usize; (n + 1) * width];
    for j in 0..=m {
        dp[j] = j;
    }
    for i in 1..=n {
        dp[i * width] = i;
        for j in 1..=m {
            let sub_cost = usize::from(a[i - 1] != b[j - 1]);
            let diag = dp[(i - 1) * width + (j - 1)] + sub_cost;
            let del = dp[(i - 1) * width + j] + 1;
            let ins = dp[i * width + (j - 1)] + 1;
            dp[i * width + j] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * width + j];
        if i > 0 && j > 0 {
            let sub_cost = usize::from(a[i - 1] != b[j - 1]);
            if dp[(i - 1) * width + (j - 1)] + sub_cost == here {
                ops.push(if sub_cost == 0 {
                    EditOp::Match(a[i - 1])
                } else {
                    EditOp::Substitute(a[i - 1], b[j - 1])
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[(i - 1) * width + j] + 1 == here {
            ops.push(EditOp::Delete(a[i - 1]));
            i -= 1;
            continue;
        }
        ops.push(EditOp::Insert(b[j - 1]));
        j -= 1;
    }
    ops.reverse();
    AlignmentPath { ops, cost: dp[n * width + m] }
}

/// Edit operations per clean token over a parallel corpus.
pub fn noise_rate(pairs: &[ParallelPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::data("no parallel data"));
    }
    let mut edits = 0usize;
    let mut clean_tokens = 0usize;
    for pair in pairs {
        edits += levenshtein_align(&pair.clean, &pair.noisy).cost;
        clean_tokens += pair.clean.len();
    }
    if clean_tokens == 0 {
        return Err(Error::data("zero clean tokens in parallel data"));
    }
    Ok(edits as f64 / clean_tokens as f64)
}

type SymCounts = BTreeMap<Sym, BTreeMap<Sym, u64>>;

/// Token-level conditional noise distribution including the epsilon symbol.
///
/// Rows are stored sparsely; the row of a symbol never observed on the
/// clean side defaults to the identity distribution.
#[derive(Debug, Clone)]
pub struct ConfusionMatrix {
    vocab: Vec<Sym>,
    index: HashMap<Sym, usize>,
    /// clean-symbol index -> (outcome index, probability), sorted by outcome.
    rows: BTreeMap<usize, Vec<(usize, f64)>>,
    /// Raw aligned-event counts backing `rows` (empty for loaded matrices).
    counts: BTreeMap<usize, Vec<(usize, u64)>>,
    floor: f64,
}

impl ConfusionMatrix {
    pub fn vocab(&self) -> &[Sym] {
        &self.vocab
    }

    pub fn eps_index(&self) -> usize {
        self.vocab.len() - 1
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn sym_index(&self, sym: Sym) -> Option<usize> {
        self.index.get(&sym).copied()
    }

    pub fn counts(&self, from: Sym) -> Vec<(Sym, u64)> {
        match self.sym_index(from).and_then(|i| self.counts.get(&i)) {
            Some(entries) => entries.iter().map(|&(j, c)| (self.vocab[j], c)).collect(),
            None => Vec::new(),
        }
    }

    /// The outcome distribution for a clean-side symbol. Symbols without a
    /// stored row (including symbols outside the vocabulary) get the
    /// identity distribution.
    pub fn row(&self, from: Sym) -> Vec<(Sym, f64)> {
        match self.sym_index(from).and_then(|i| self.rows.get(&i)) {
            Some(entries) => entries.iter().map(|&(j, p)| (self.vocab[j], p)).collect(),
            None => vec![(from, 1.0)],
        }
    }

    pub fn prob(&self, from: Sym, to: Sym) -> f64 {
        self.row(from)
            .iter()
            .find(|(s, _)| *s == to)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    /// Samples an outcome for `from` by inverse CDF over the stored row.
    pub fn sample<R: Rng>(&self, from: Sym, rng: &mut R) -> Sym {
        match self.sym_index(from).and_then(|i| self.rows.get(&i)) {
            Some(entries) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for &(j, p) in entries {
                    acc += p;
                    if u < acc {
                        return self.vocab[j];
                    }
                }
                // Floating-point tail: fall back to the last outcome.
                self.vocab[entries.last().expect("non-empty row").0]
            }
            None => from,
        }
    }

    /// Substitution candidates for the attack channel: positive-probability
    /// outcomes that are neither the token itself nor epsilon.
    pub fn substitution_candidates(&self, from: Token) -> Vec<(Token, f64)> {
        self.row(Sym::Tok(from))
            .into_iter()
            .filter_map(|(sym, p)| match sym {
                Sym::Tok(t) if t != from && p > 0.0 => Some((t, p)),
                _ => None,
            })
            .collect()
    }

    /// Builds a matrix directly from per-row outcome probabilities.
    /// Rows must each sum to 1 within 1e-9.
    pub fn from_probs(rows: BTreeMap<Sym, Vec<(Sym, f64)>>) -> Result<Self> {
        let mut vocab_set: BTreeMap<Sym, ()> = BTreeMap::new();
        for (from, outcomes) in &rows {
            vocab_set.insert(*from, ());
            for (to, _) in outcomes {
                vocab_set.insert(*to, ());
            }
        }
        vocab_set.remove(&Sym::Eps);
        let mut vocab: Vec<Sym> = vocab_set.into_keys().collect();
        vocab.push(Sym::Eps);
        let index: HashMap<Sym, usize> = vocab.iter().enumerate().map(|(i, s)| (*s, i)).collect();

        let mut stored: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for (from, outcomes) in rows {
            let mut entries: Vec<(usize, f64)> = outcomes.into_iter().map(|(to, p)| (index[&to], p)).collect();
            entries.sort_unstable_by_key(|&(j, _)| j);
            validate_row(&from.to_string(), &entries)?;
            stored.insert(index[&from], entries);
        }
        Ok(ConfusionMatrix { vocab, index, rows: stored, counts: BTreeMap::new(), floor: 0.0 })
    }

    /// An identity matrix over the given alphabet (useful as a no-op channel).
    pub fn identity(alphabet: &[Token]) -> Self {
        let rows = alphabet
            .iter()
            .map(|&t| (Sym::Tok(t), vec![(Sym::Tok(t), 1.0)]))
            .collect();
        Self::from_probs(rows).expect("identity rows are stochastic")
    }

    /// Deterministic JSON serialization; probabilities carry 12 significant
    /// digits and the document round-trips byte-identically.
    pub fn to_json_string(&self) -> String {
        let mut s = String::new();
        s.push_str("{\"version\":1,\"vocab\":[");
        for (i, sym) in self.vocab.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&json_string(&sym.to_string()));
        }
        s.push_str(&format!("],\"eps_index\":{},\"rows\":{{", self.eps_index()));
        let mut first_row = true;
        for (&from, entries) in &self.rows {
            if !first_row {
                s.push(',');
            }
            first_row = false;
            s.push_str(&json_string(&self.vocab[from].to_string()));
            s.push_str(":{");
            for (k, &(to, p)) in entries.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                s.push_str(&json_string(&self.vocab[to].to_string()));
                s.push(':');
                s.push_str(&format!("{p:.11e}"));
            }
            s.push('}');
        }
        s.push_str("}}");
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::data(format!("confusion matrix: {e}")))?;
        let version = doc.get("version").and_then(|v| v.as_u64());
        if version != Some(1) {
            return Err(Error::data("confusion matrix: unsupported or missing version"));
        }
        let vocab_json = doc
            .get("vocab")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::data("confusion matrix: missing vocab"))?;
        let eps_index = doc
            .get("eps_index")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::data("confusion matrix: missing eps_index"))? as usize;
        if eps_index + 1 != vocab_json.len() {
            return Err(Error::data("confusion matrix: eps_index must point at the last vocab entry"));
        }
        let mut vocab = Vec::with_capacity(vocab_json.len());
        for (i, v) in vocab_json.iter().enumerate() {
            let s = v.as_str().ok_or_else(|| Error::data("confusion matrix: vocab entry is not a string"))?;
            vocab.push(parse_sym(s, i == eps_index)?);
        }
        let index: HashMap<Sym, usize> = vocab.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        if index.len() != vocab.len() {
            return Err(Error::data("confusion matrix: duplicate vocab entry"));
        }

        let rows_json = doc
            .get("rows")
            .and_then(|v| v.as_object())
            .ok_or_else(|| Error::data("confusion matrix: missing rows"))?;
        let mut rows: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for (from_str, outcomes) in rows_json {
            let from = parse_sym(from_str, from_str == EPS_MARKER)?;
            let from_idx = *index
                .get(&from)
                .ok_or_else(|| Error::data(format!("confusion matrix: row symbol {from_str:?} not in vocab")))?;
            let obj = outcomes
                .as_object()
                .ok_or_else(|| Error::data("confusion matrix: row is not an object"))?;
            let mut entries = Vec::with_capacity(obj.len());
            for (to_str, p) in obj {
                let to = parse_sym(to_str, to_str == EPS_MARKER)?;
                let to_idx = *index
                    .get(&to)
                    .ok_or_else(|| Error::data(format!("confusion matrix: outcome {to_str:?} not in vocab")))?;
                let p = p
                    .as_f64()
                    .ok_or_else(|| Error::data("confusion matrix: probability is not a number"))?;
                entries.push((to_idx, p));
            }
            entries.sort_unstable_by_key(|&(j, _)| j);
            validate_row(from_str, &entries)?;
            rows.insert(from_idx, entries);
        }
        Ok(ConfusionMatrix { vocab, index, rows, counts: BTreeMap::new(), floor: 0.0 })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json_string().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings are serializable")
}

fn parse_sym(s: &str, expect_eps: bool) -> Result<Sym> {
    if s == EPS_MARKER {
        return Ok(Sym::Eps);
    }
    if expect_eps {
        return Err(Error::data(format!("confusion matrix: expected {EPS_MARKER:?}, found {s:?}")));
    }
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(Sym::Tok(Token(c))),
        _ => Err(Error::data(format!("confusion matrix: token {s:?} is not a single scalar"))),
    }
}

fn validate_row(label: &str, entries: &[(usize, f64)]) -> Result<()> {
    let mut sum = 0.0;
    for &(_, p) in entries {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::data(format!("confusion matrix: probability {p} out of range in row {label:?}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::data(format!("confusion matrix: row {label:?} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Estimates the confusion matrix from aligned parallel pairs.
///
/// Per clean sentence of length n there are n+1 epsilon slots; observed
/// insertions fill them and the remainder stays on epsilon itself. `floor`
/// mixes that much probability mass toward the identity outcome of each
/// row, damping noise without inventing unseen substitutions.
pub fn build_confusion(pairs: &[ParallelPair], floor: f64) -> Result<ConfusionMatrix> {
    if pairs.is_empty() {
        return Err(Error::data("no parallel data"));
    }
    if !(0.0..1.0).contains(&floor) {
        return Err(Error::config(format!("floor must be in [0,1), got {floor}")));
    }

    let mut counts: SymCounts = BTreeMap::new();
    let mut bump = |from: Sym, to: Sym, by: u64| {
        if by > 0 {
            *counts.entry(from).or_default().entry(to).or_default() += by;
        }
    };

    for pair in pairs {
        let path = levenshtein_align(&pair.clean, &pair.noisy);
        let mut inserts = 0u64;
        for op in &path.ops {
            match *op {
                EditOp::Match(w) => bump(Sym::Tok(w), Sym::Tok(w), 1),
                EditOp::Substitute(w, w2) => bump(Sym::Tok(w), Sym::Tok(w2), 1),
                EditOp::Delete(w) => bump(Sym::Tok(w), Sym::Eps, 1),
                EditOp::Insert(w2) => {
                    bump(Sym::Eps, Sym::Tok(w2), 1);
                    inserts += 1;
                }
            }
        }
        let slots = pair.clean.len() as u64 + 1;
        bump(Sym::Eps, Sym::Eps, slots.saturating_sub(inserts));
    }

    // Vocabulary: every token observed on either side, sorted, epsilon last.
    let mut vocab_set: BTreeMap<Sym, ()> = BTreeMap::new();
    for pair in pairs {
        for t in pair.clean.tokens.iter().chain(pair.noisy.tokens.iter()) {
            vocab_set.insert(Sym::Tok(*t), ());
        }
    }
    let mut vocab: Vec<Sym> = vocab_set.into_keys().collect();
    vocab.push(Sym::Eps);
    let index: HashMap<Sym, usize> = vocab.iter().enumerate().map(|(i, s)| (*s, i)).collect();

    let mut rows: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    let mut raw: BTreeMap<usize, Vec<(usize, u64)>> = BTreeMap::new();
    for (from, outcome_counts) in counts {
        let from_idx = index[&from];
        let total: u64 = outcome_counts.values().sum();
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(outcome_counts.len() + 1);
        let mut raw_entries: Vec<(usize, u64)> = Vec::with_capacity(outcome_counts.len());
        let mut has_identity = false;
        for (to, c) in outcome_counts {
            let to_idx = index[&to];
            raw_entries.push((to_idx, c));
            let mut p = (1.0 - floor) * (c as f64 / total as f64);
            if to_idx == from_idx {
                p += floor;
                has_identity = true;
            }
            entries.push((to_idx, p));
        }
        if floor > 0.0 && !has_identity {
            entries.push((from_idx, floor));
        }
        entries.sort_unstable_by_key(|&(j, _)| j);
        raw_entries.sort_unstable_by_key(|&(j, _)| j);
        rows.insert(from_idx, entries);
        raw.insert(from_idx, raw_entries);
    }

    Ok(ConfusionMatrix { vocab, index, rows, counts: raw, floor })
}
