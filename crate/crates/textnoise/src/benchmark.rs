//! Shipped synthetic benchmark: a separable marker-detection task plus a
//! parallel corpus with planted, span-correlated confusions.
//!
//! Positives contain exactly one of three marker bigrams drawn from six
//! dedicated marker characters; negatives are built from the other 44
//! background characters, so no negative can contain marker evidence.
//! The parallel corpus runs the same sentence generator through a planted
//! noise process shaped like a real recognition engine:
//! - marker characters are rare glyphs and get misread into three fixed
//!   background confusables at a high rate, so noise destroys label
//!   evidence but leaves a learnable trace;
//! - background characters get misread into other background characters
//!   only, so noise never fabricates marker evidence;
//! - insertions draw from background characters;
//! - the substitution rate roughly triples right after a substitution,
//!   giving the context channel a span effect to learn.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, ParallelPair, Sentence, Token};
use crate::rng::stream_rng;

const SALT_TRAIN: u64 = 0x4247_5452; // "BGTR"
const SALT_TEST: u64 = 0x4247_5445; // "BGTE"
const SALT_PARALLEL: u64 = 0x4247_5041; // "BGPA"

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub parallel_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub positive_rate: f64,
    /// Planted per-token substitution probability of background characters.
    pub sub_rate: f64,
    /// Planted per-token substitution probability of marker characters.
    pub marker_sub_rate: f64,
    /// Planted per-token deletion probability.
    pub del_rate: f64,
    /// Planted per-slot insertion probability.
    pub ins_rate: f64,
    /// Multiplier on the substitution rate right after a substitution.
    pub span_boost: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            seed: 0,
            train_size: 2000,
            test_size: 500,
            parallel_size: 5000,
            min_len: 20,
            max_len: 40,
            positive_rate: 0.3,
            sub_rate: 0.06,
            marker_sub_rate: 0.4,
            del_rate: 0.015,
            ins_rate: 0.015,
            span_boost: 3.0,
        }
    }
}

/// The 50-symbol benchmark alphabet: a-z plus A-X.
pub fn vocab() -> Vec<char> {
    let mut v: Vec<char> = ('a'..='z').collect();
    v.extend('A'..='X');
    v
}

/// The three marker bigrams; their six characters never appear in
/// background text.
pub const MARKER_BIGRAMS: [(char, char); 3] = [('u', 'v'), ('w', 'x'), ('y', 'z')];

fn marker_chars() -> [char; 6] {
    ['u', 'v', 'w', 'x', 'y', 'z']
}

fn background_chars() -> Vec<char> {
    let markers = marker_chars();
    vocab().into_iter().filter(|c| !markers.contains(c)).collect()
}

#[derive(Debug, Clone)]
pub struct BenchmarkData {
    pub train: Dataset,
    pub test: Dataset,
    pub parallel: Vec<ParallelPair>,
}

fn gen_sentence(spec: &BenchmarkSpec, background: &[char], rng: &mut ChaCha8Rng) -> (Vec<Token>, u8) {
    let len = rng.gen_range(spec.min_len..=spec.max_len);
    let mut tokens: Vec<Token> =
        (0..len).map(|_| Token(background[rng.gen_range(0..background.len())])).collect();
    let positive = rng.gen::<f64>() < spec.positive_rate;
    if positive {
        let (m0, m1) = MARKER_BIGRAMS[rng.gen_range(0..MARKER_BIGRAMS.len())];
        let at = rng.gen_range(0..=tokens.len());
        tokens.insert(at, Token(m1));
        tokens.insert(at, Token(m0));
    }
    (tokens, u8::from(positive))
}

/// The planted noise process behind the parallel corpus: independent
/// insertions per slot (background characters only), substitutions into
/// three fixed background confusables per character (probabilities
/// 0.5/0.3/0.2), deletions, and a substitution rate `span_boost` times
/// higher right after a substitution. Marker characters are misread far
/// more often than background ones and always land on background
/// characters, so noise can erase label evidence but never invent it.
fn plant_noise(spec: &BenchmarkSpec, clean: &[Token], background: &[char], rng: &mut ChaCha8Rng) -> Vec<Token> {
    let n = background.len();
    let markers = marker_chars();
    let confusable = |c: char, u: f64| -> char {
        let offset = if u < 0.5 {
            1
        } else if u < 0.8 {
            7
        } else {
            13
        };
        // The confusion targets of a marker are anchored off its position
        // in the marker list; background confusables stay in background.
        match markers.iter().position(|&m| m == c) {
            Some(i) => background[(5 * i + offset) % n],
            None => {
                let i = background.iter().position(|&a| a == c).expect("benchmark token");
                background[(i + offset) % n]
            }
        }
    };
    let mut out = Vec::with_capacity(clean.len() + 2);
    let mut after_substitution = false;
    for &t in clean {
        if rng.gen::<f64>() < spec.ins_rate {
            out.push(Token(background[rng.gen_range(0..n)]));
        }
        let base_rate = if markers.contains(&t.0) { spec.marker_sub_rate } else { spec.sub_rate };
        let sub_rate = if after_substitution {
            (base_rate * spec.span_boost).min(0.9)
        } else {
            base_rate
        };
        let r: f64 = rng.gen();
        if r < sub_rate {
            out.push(Token(confusable(t.0, rng.gen())));
            after_substitution = true;
        } else if r < sub_rate + spec.del_rate {
            after_substitution = false;
        } else {
            out.push(t);
            after_substitution = false;
        }
    }
    if rng.gen::<f64>() < spec.ins_rate {
        out.push(Token(background[rng.gen_range(0..n)]));
    }
    out
}

/// Generates the benchmark deterministically from the spec seed.
pub fn generate(spec: &BenchmarkSpec) -> BenchmarkData {
    let background = background_chars();

    let make_dataset = |name: &str, size: usize, salt: u64| -> Dataset {
        let sentences = (0..size)
            .map(|i| {
                let mut rng = stream_rng(spec.seed, salt, i as u64);
                let (tokens, label) = gen_sentence(spec, &background, &mut rng);
                Sentence::new(tokens, Some(label), i as u64)
            })
            .collect();
        Dataset::new(name, sentences)
    };
    let train = make_dataset("bench-train", spec.train_size, SALT_TRAIN);
    let test = make_dataset("bench-test", spec.test_size, SALT_TEST);

    let parallel = (0..spec.parallel_size)
        .map(|i| {
            let mut rng = stream_rng(spec.seed, SALT_PARALLEL, i as u64);
            let (tokens, _) = gen_sentence(spec, &background, &mut rng);
            let mut noisy = plant_noise(spec, &tokens, &background, &mut rng);
            while noisy.is_empty() {
                noisy = plant_noise(spec, &tokens, &background, &mut rng);
            }
            ParallelPair {
                clean: Sentence::new(tokens, None, i as u64),
                noisy: Sentence::new(noisy, None, i as u64),
            }
        })
        .collect();

    BenchmarkData { train, test, parallel }
}
