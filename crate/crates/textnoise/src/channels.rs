//! Noise channels: configured generators mapping a clean sentence to a
//! noisy copy.
//!
//! Four simulators share one interface: a rule channel driven by the
//! confusion matrix, a greedy attack channel guided by a trained
//! classifier, a context-conditioned channel that couples an error to the
//! previously emitted token, and the uniform random-edit channel used by
//! the baseline and the noise sweep. A pre-generated tsv file can stand in
//! for any of them.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::{build_confusion, levenshtein_align, ConfusionMatrix, EditOp, Sym};
use crate::classifier::{forward, ClassifierParams};
use crate::corpus::{load_parallel, ParallelPair, Sentence, Token, Tokenizer};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// A configured noise generator. Channels are immutable after
/// construction; injection of distinct sentences may run on any number of
/// workers with identical results because every sentence gets its own
/// RNG stream derived from `(seed, sentence id, rep)`.
pub trait NoiseChannel: Send + Sync {
    fn tag(&self) -> &str;

    /// Injects noise into one sentence. `rep` distinguishes independent
    /// copies of the same sentence within one pool.
    fn inject_rep(&self, x: &Sentence, rep: u64) -> Result<Sentence>;

    fn inject(&self, x: &Sentence) -> Result<Sentence> {
        self.inject_rep(x, 0)
    }
}

/// Extends a sentence with epsilon slots, resamples every slot from the
/// matrix, and strips epsilon outcomes.
fn resample_slots<F>(x: &Sentence, mut outcome: F) -> Vec<Token>
where
    F: FnMut(Sym, &[Token]) -> Sym,
{
    let mut out: Vec<Token> = Vec::with_capacity(x.len() + 2);
    for &t in &x.tokens {
        if let Sym::Tok(w) = outcome(Sym::Eps, &out) {
            out.push(w);
        }
        if let Sym::Tok(w) = outcome(Sym::Tok(t), &out) {
            out.push(w);
        }
    }
    if let Sym::Tok(w) = outcome(Sym::Eps, &out) {
        out.push(w);
    }
    out
}

/// Rule-based simulation: every slot of the epsilon-extended sentence is
/// resampled independently from its confusion-matrix row.
#[derive(Clone)]
pub struct RuleChannel {
    matrix: Arc<ConfusionMatrix>,
    seed: u64,
}

impl RuleChannel {
    pub fn new(matrix: Arc<ConfusionMatrix>, seed: u64) -> Self {
        RuleChannel { matrix, seed }
    }

    pub fn matrix(&self) -> &ConfusionMatrix {
        &self.matrix
    }
}

impl NoiseChannel for RuleChannel {
    fn tag(&self) -> &str {
        "rule"
    }

    fn inject_rep(&self, x: &Sentence, rep: u64) -> Result<Sentence> {
        let mut rng = stream_rng(self.seed, x.id, rep);
        let tokens = resample_slots(x, |sym, _| self.matrix.sample(sym, &mut rng));
        Ok(Sentence::new(tokens, x.label, x.id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AttackMode {
    /// Replace with the highest-probability confusable.
    Argmax,
    /// Sample the confusable proportional to its probability.
    Sample,
}

/// Attack-based simulation: greedily finds the positions the scorer relies
/// on most and substitutes them with confusables from the matrix.
///
/// The scorer must stay frozen while the channel is in use.
#[derive(Clone)]
pub struct AttackChannel {
    matrix: Arc<ConfusionMatrix>,
    scorer: Arc<ClassifierParams>,
    max_edits: Option<usize>,
    mode: AttackMode,
    seed: u64,
}

impl AttackChannel {
    pub fn new(
        matrix: Arc<ConfusionMatrix>,
        scorer: Arc<ClassifierParams>,
        max_edits: Option<usize>,
        mode: AttackMode,
        seed: u64,
    ) -> Self {
        AttackChannel { matrix, scorer, max_edits, mode, seed }
    }

    fn edit_budget(&self, len: usize) -> usize {
        match self.max_edits {
            Some(k) => k,
            // One edit per ten tokens, at least one.
            None => std::cmp::max(1, len.div_ceil(10)),
        }
    }

    /// Probability the scorer assigns to the reference label of `x`,
    /// optionally with one position's embedding zeroed out. Unlabelled
    /// sentences use the scorer's own prediction on the clean input as the
    /// reference.
    fn p_true(&self, x: &Sentence, label: u8, mask: Option<usize>) -> f64 {
        let p = forward(&self.scorer, x, mask).prob;
        if label == 1 {
            p
        } else {
            1.0 - p
        }
    }

    fn reference_label(&self, x: &Sentence) -> u8 {
        match x.label {
            Some(l) => l,
            None => self.scorer.predict(x, 0.5),
        }
    }

    /// Importance of each position: the drop in the reference-label
    /// probability when that position's embedding is zeroed. Sorted
    /// descending, ties broken by the smaller position.
    pub fn rank(&self, x: &Sentence) -> Result<Vec<(usize, f64)>> {
        if self.scorer.steps() == 0 {
            return Err(Error::data("attack channel: scorer has not been trained"));
        }
        let label = self.reference_label(x);
        let base = self.p_true(x, label, None);
        let mut scored: Vec<(usize, f64)> = (0..x.len())
            .map(|i| (i, base - self.p_true(x, label, Some(i))))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(scored)
    }
}

impl NoiseChannel for AttackChannel {
    fn tag(&self) -> &str {
        "attack"
    }

    fn inject_rep(&self, x: &Sentence, rep: u64) -> Result<Sentence> {
        if x.is_empty() {
            return Ok(x.clone());
        }
        let ranked = self.rank(x)?;
        let mut rng = stream_rng(self.seed, x.id, rep);
        let mut tokens = x.tokens.clone();
        let mut edits = 0usize;
        let budget = self.edit_budget(x.len());
        for (pos, _) in ranked {
            if edits >= budget {
                break;
            }
            let candidates = self.matrix.substitution_candidates(tokens[pos]);
            if candidates.is_empty() {
                continue;
            }
            let replacement = match self.mode {
                AttackMode::Argmax => {
                    // Highest probability; ties fall to the first candidate
                    // in vocabulary order.
                    candidates
                        .iter()
                        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                        .expect("non-empty candidates")
                        .0
                }
                AttackMode::Sample => {
                    let total: f64 = candidates.iter().map(|(_, p)| p).sum();
                    let u: f64 = rng.gen::<f64>() * total;
                    let mut acc = 0.0;
                    let mut chosen = candidates.last().expect("non-empty").0;
                    for &(t, p) in &candidates {
                        acc += p;
                        if u < acc {
                            chosen = t;
                            break;
                        }
                    }
                    chosen
                }
            };
            tokens[pos] = replacement;
            edits += 1;
        }
        Ok(Sentence::new(tokens, x.label, x.id))
    }
}

type BigramKey = (Sym, Option<Token>);

/// Context-conditioned simulation: the outcome of each slot depends on the
/// previously emitted noisy token, interpolated with the unigram matrix.
/// Captures span-coupled errors where one misrecognition conditions the
/// next; generation runs left to right like an autoregressive decoder.
#[derive(Clone)]
pub struct ContextChannel {
    unigram: Arc<ConfusionMatrix>,
    /// (clean slot symbol, previously emitted token; None = sentence start)
    /// -> outcome distribution, sorted by outcome symbol.
    bigram: HashMap<BigramKey, Vec<(Sym, f64)>>,
    lambda: f64,
    seed: u64,
}

impl ContextChannel {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn unigram(&self) -> &ConfusionMatrix {
        &self.unigram
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The effective distribution for one slot given its context.
    /// Unseen contexts back off to the unigram row exactly.
    pub fn slot_distribution(&self, sym: Sym, prev: Option<Token>) -> Vec<(Sym, f64)> {
        let uni = self.unigram.row(sym);
        match self.bigram.get(&(sym, prev)) {
            Some(bi) => {
                let mut merged: BTreeMap<Sym, f64> = BTreeMap::new();
                for (s, p) in &uni {
                    *merged.entry(*s).or_insert(0.0) += (1.0 - self.lambda) * p;
                }
                for (s, p) in bi {
                    *merged.entry(*s).or_insert(0.0) += self.lambda * p;
                }
                merged.into_iter().filter(|&(_, p)| p > 0.0).collect()
            }
            None => uni,
        }
    }

    fn sample_slot<R: Rng>(&self, sym: Sym, prev: Option<Token>, rng: &mut R) -> Sym {
        // Bitwise-identical to ConfusionMatrix::sample when the unigram row
        // is used, so a lambda=0 channel reproduces the rule channel.
        if self.lambda == 0.0 || !self.bigram.contains_key(&(sym, prev)) {
            return self.unigram.sample(sym, rng);
        }
        let dist = self.slot_distribution(sym, prev);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(s, p) in &dist {
            acc += p;
            if u < acc {
                return s;
            }
        }
        dist.last().map(|&(s, _)| s).unwrap_or(sym)
    }
}

impl NoiseChannel for ContextChannel {
    fn tag(&self) -> &str {
        "context"
    }

    fn inject_rep(&self, x: &Sentence, rep: u64) -> Result<Sentence> {
        let mut rng = stream_rng(self.seed, x.id, rep);
        let tokens = resample_slots(x, |sym, emitted| {
            let prev = emitted.last().copied();
            self.sample_slot(sym, prev, &mut rng)
        });
        Ok(Sentence::new(tokens, x.label, x.id))
    }
}

/// Fits a context channel: the unigram part is exactly `build_confusion`;
/// the bigram part counts each slot outcome conditioned on the clean slot
/// symbol and the previously emitted noisy token.
pub fn fit_context_channel(pairs: &[ParallelPair], lambda: f64, floor: f64, seed: u64) -> Result<ContextChannel> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config(format!("lambda must be in [0,1], got {lambda}")));
    }
    let unigram = Arc::new(build_confusion(pairs, floor)?);

    let mut counts: HashMap<BigramKey, BTreeMap<Sym, u64>> = HashMap::new();
    let mut bump = |key: BigramKey, outcome: Sym| {
        *counts.entry(key).or_default().entry(outcome).or_default() += 1;
    };
    for pair in pairs {
        let path = levenshtein_align(&pair.clean, &pair.noisy);
        let mut prev: Option<Token> = None;
        let mut gap_inserts = 0usize;
        for op in &path.ops {
            match *op {
                EditOp::Insert(w2) => {
                    bump((Sym::Eps, prev), Sym::Tok(w2));
                    prev = Some(w2);
                    gap_inserts += 1;
                }
                EditOp::Match(w) | EditOp::Substitute(w, _) | EditOp::Delete(w) => {
                    if gap_inserts == 0 {
                        bump((Sym::Eps, prev), Sym::Eps);
                    }
                    gap_inserts = 0;
                    let outcome = match *op {
                        EditOp::Match(w) => Sym::Tok(w),
                        EditOp::Substitute(_, w2) => Sym::Tok(w2),
                        _ => Sym::Eps,
                    };
                    bump((Sym::Tok(w), prev), outcome);
                    if let Sym::Tok(t) = outcome {
                        prev = Some(t);
                    }
                }
            }
        }
        if gap_inserts == 0 {
            bump((Sym::Eps, prev), Sym::Eps);
        }
    }

    let bigram = counts
        .into_iter()
        .map(|(key, outcomes)| {
            let total: u64 = outcomes.values().sum();
            let dist: Vec<(Sym, f64)> =
                outcomes.into_iter().map(|(s, c)| (s, c as f64 / total as f64)).collect();
            (key, dist)
        })
        .collect();

    Ok(ContextChannel { unigram, bigram, lambda, seed })
}

/// Uniform random edits: each position is selected independently with
/// probability `rate`; a selected position gets an insertion, deletion or
/// replacement with equal probability. Inserted and replacement tokens are
/// drawn uniformly from the vocabulary; an insertion lands right after the
/// selected position.
#[derive(Debug, Clone)]
pub struct RandomChannel {
    rate: f64,
    vocab: Vec<Token>,
    seed: u64,
}

impl RandomChannel {
    pub fn new(rate: f64, mut vocab: Vec<Token>, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::config(format!("rate must be in [0,1], got {rate}")));
        }
        vocab.sort_unstable();
        vocab.dedup();
        if vocab.is_empty() && rate > 0.0 {
            return Err(Error::config("random channel needs a non-empty vocabulary when rate > 0"));
        }
        Ok(RandomChannel { rate, vocab, seed })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RandomEdit {
    Insert,
    Delete,
    Replace,
}

fn random_edit_pass(
    tokens: &[Token],
    rate: f64,
    vocab: &[Token],
    rng: &mut ChaCha8Rng,
    forced: Option<RandomEdit>,
) -> Vec<Token> {
    let mut out = Vec::with_capacity(tokens.len() + 2);
    for &t in tokens {
        if rng.gen::<f64>() >= rate {
            out.push(t);
            continue;
        }
        let edit = forced.unwrap_or_else(|| match rng.gen_range(0..3u8) {
            0 => RandomEdit::Insert,
            1 => RandomEdit::Delete,
            _ => RandomEdit::Replace,
        });
        match edit {
            RandomEdit::Insert => {
                out.push(t);
                out.push(vocab[rng.gen_range(0..vocab.len())]);
            }
            RandomEdit::Delete => {}
            RandomEdit::Replace => out.push(vocab[rng.gen_range(0..vocab.len())]),
        }
    }
    out
}

impl NoiseChannel for RandomChannel {
    fn tag(&self) -> &str {
        "random"
    }

    fn inject_rep(&self, x: &Sentence, rep: u64) -> Result<Sentence> {
        let mut rng = stream_rng(self.seed, x.id, rep);
        let tokens = random_edit_pass(&x.tokens, self.rate, &self.vocab, &mut rng, None);
        Ok(Sentence::new(tokens, x.label, x.id))
    }
}

/// Escape hatch for external generators: a `clean<TAB>noisy` tsv accepted
/// wherever a channel is expected. Lookup is by the detokenized clean text;
/// the first occurrence of a clean sentence wins.
pub struct FileChannel {
    map: HashMap<String, String>,
    tokenizer: Tokenizer,
}

impl FileChannel {
    pub fn from_tsv(path: &Path, tokenizer: Tokenizer) -> Result<Self> {
        let pairs = load_parallel(path, &tokenizer)?;
        Ok(Self::from_pairs(&pairs, tokenizer))
    }

    pub fn from_pairs(pairs: &[ParallelPair], tokenizer: Tokenizer) -> Self {
        let mut map = HashMap::with_capacity(pairs.len());
        for p in pairs {
            map.entry(p.clean.text()).or_insert_with(|| p.noisy.text());
        }
        FileChannel { map, tokenizer }
    }
}

impl NoiseChannel for FileChannel {
    fn tag(&self) -> &str {
        "file"
    }

    fn inject_rep(&self, x: &Sentence, _rep: u64) -> Result<Sentence> {
        let text = x.text();
        let noisy = self
            .map
            .get(&text)
            .ok_or_else(|| Error::data(format!("file channel: no noisy counterpart for sentence {}", x.id)))?;
        Ok(Sentence::new(self.tokenizer.tokenize(noisy), x.label, x.id))
    }
}

/// One line of the `simulate` output: a clean/noisy pair with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimRecord {
    pub id: u64,
    pub clean: String,
    pub noisy: String,
    pub label: Option<u8>,
    pub channel: String,
}
