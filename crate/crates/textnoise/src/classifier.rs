//! A small self-contained differentiable binary text classifier:
//! token embeddings -> mean pooling -> one tanh hidden layer (the
//! "representation") -> sigmoid output, with exact analytic gradients.
//!
//! Mean pooling is computed over canonically ordered token counts, so the
//! forward pass is bit-for-bit invariant to token order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{write_atomic, Sentence, Token};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

const SALT_INIT: u64 = 0x494e_4954; // "INIT"

/// Guard below which a representation is treated as zero for cosine.
pub const COSINE_NORM_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub embed: usize,
    pub hidden: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims { embed: 32, hidden: 32 }
    }
}

/// Which layer the stability distance is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StabilityMode {
    /// Cosine distance between hidden representations.
    Representation,
    /// Squared difference of output probabilities (cosine is degenerate
    /// on scalars).
    Output,
}

/// Model parameters. The embedding table has one extra row at index
/// `vocab.len()` for unknown tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    vocab: Vec<char>,
    embed: Vec<f64>,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    d: usize,
    h: usize,
    steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    /// Hidden representation e = tanh(W1 * meanpool + b1).
    pub representation: Vec<f64>,
    /// Output probability p = sigmoid(w2 . e + b2).
    pub prob: f64,
    /// Mean-pooled embedding, cached for backprop.
    pub pooled: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub embed: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// alpha * stand + (1 - alpha) * sim, averaged over the batch.
    pub total: f64,
    pub stand: f64,
    pub sim: f64,
}

/// One training sample: a clean sentence, an optional noisy copy sharing
/// the same label.
#[derive(Debug, Clone, Copy)]
pub struct BatchSample<'a> {
    pub clean: &'a Sentence,
    pub noisy: Option<&'a Sentence>,
    pub label: u8,
}

impl ClassifierParams {
    /// Deterministic initialization from a run seed: embeddings and W1
    /// uniform in +/- 1/sqrt(d), everything else zero.
    pub fn init(vocab: &[Token], dims: Dims, seed: u64) -> Self {
        let mut chars: Vec<char> = vocab.iter().map(|t| t.0).collect();
        chars.sort_unstable();
        chars.dedup();
        let d = dims.embed;
        let h = dims.hidden;
        let bound = 1.0 / (d as f64).sqrt();
        let mut rng = stream_rng(seed, SALT_INIT, 0);
        let mut uniform = |n: usize| -> Vec<f64> {
            use rand::Rng;
            (0..n).map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * bound).collect()
        };
        let embed = uniform((chars.len() + 1) * d);
        let w1 = uniform(h * d);
        ClassifierParams {
            vocab: chars,
            embed,
            w1,
            b1: vec![0.0; h],
            w2: vec![0.0; h],
            b2: 0.0,
            d,
            h,
            steps: 0,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims { embed: self.d, hidden: self.h }
    }

    pub fn vocab(&self) -> &[char] {
        &self.vocab
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Marks the model as trained without running an optimizer step; for
    /// hand-built scorers.
    pub fn mark_trained(&mut self) {
        self.steps = self.steps.max(1);
    }

    pub fn token_index(&self, t: Token) -> usize {
        self.vocab.binary_search(&t.0).unwrap_or(self.vocab.len())
    }

    /// Overwrites one embedding row (row `vocab.len()` is the UNK row).
    pub fn set_embedding(&mut self, row: usize, values: &[f64]) {
        assert_eq!(values.len(), self.d, "embedding row must have d values");
        self.embed[row * self.d..(row + 1) * self.d].copy_from_slice(values);
    }

    /// Overwrites the dense layers; shapes must match (h*d, h, h, scalar).
    pub fn set_dense(&mut self, w1: &[f64], b1: &[f64], w2: &[f64], b2: f64) {
        assert_eq!(w1.len(), self.h * self.d);
        assert_eq!(b1.len(), self.h);
        assert_eq!(w2.len(), self.h);
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = b2;
    }

    /// Total number of scalar parameters in canonical order
    /// (embed, w1, b1, w2, b2); matches [`Gradients::flat`].
    pub fn param_count(&self) -> usize {
        self.embed.len() + self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Adds `eps` to the i-th parameter in canonical order; the mutation
    /// hook used by finite-difference gradient checks.
    pub fn nudge(&mut self, i: usize, eps: f64) {
        let mut i = i;
        for part in [&mut self.embed, &mut self.w1, &mut self.b1, &mut self.w2] {
            if i < part.len() {
                part[i] += eps;
                return;
            }
            i -= part.len();
        }
        assert_eq!(i, 0, "parameter index out of range");
        self.b2 += eps;
    }

    pub fn predict(&self, x: &Sentence, threshold: f64) -> u8 {
        u8::from(forward(self, x, None).prob >= threshold)
    }

    /// Token rows and multiplicities of a sentence in canonical (row) order;
    /// the masked position is excluded, the denominator is not adjusted.
    fn pooled_counts(&self, x: &Sentence, mask: Option<usize>) -> Vec<(usize, usize)> {
        let mut rows: Vec<usize> = x
            .tokens
            .iter()
            .enumerate()
            .filter(|(i, _)| mask != Some(*i))
            .map(|(_, t)| self.token_index(*t))
            .collect();
        rows.sort_unstable();
        let mut counted: Vec<(usize, usize)> = Vec::new();
        for r in rows {
            match counted.last_mut() {
                Some((row, c)) if *row == r => *c += 1,
                _ => counted.push((r, 1)),
            }
        }
        counted
    }

    fn logit(&self, e: &[f64]) -> f64 {
        let mut z = self.b2;
        for k in 0..self.h {
            z += self.w2[k] * e[k];
        }
        z
    }

    pub fn to_json_string(&self) -> String {
        let file = CheckpointFile {
            version: 1,
            d: self.d,
            h: self.h,
            steps: self.steps,
            vocab: self.vocab.clone(),
            embed: self.embed.iter().map(fmt_f64).collect(),
            w1: self.w1.iter().map(fmt_f64).collect(),
            b1: self.b1.iter().map(fmt_f64).collect(),
            w2: self.w2.iter().map(fmt_f64).collect(),
            b2: fmt_f64(&self.b2),
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| Error::data(format!("checkpoint: {e}")))?;
        if file.version != 1 {
            return Err(Error::data(format!("checkpoint: unsupported version {}", file.version)));
        }
        let expect = |name: &str, got: usize, want: usize| -> Result<()> {
            if got != want {
                return Err(Error::data(format!("checkpoint: {name} has {got} values, expected {want}")));
            }
            Ok(())
        };
        expect("embed", file.embed.len(), (file.vocab.len() + 1) * file.d)?;
        expect("w1", file.w1.len(), file.h * file.d)?;
        expect("b1", file.b1.len(), file.h)?;
        expect("w2", file.w2.len(), file.h)?;
        let parse_all = |values: &[String], name: &str| -> Result<Vec<f64>> {
            values
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::data(format!("checkpoint: bad value {s:?} in {name}")))
                })
                .collect()
        };
        let mut sorted = file.vocab.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted != file.vocab {
            return Err(Error::data("checkpoint: vocab must be sorted and unique"));
        }
        Ok(ClassifierParams {
            vocab: file.vocab,
            embed: parse_all(&file.embed, "embed")?,
            w1: parse_all(&file.w1, "w1")?,
            b1: parse_all(&file.b1, "b1")?,
            w2: parse_all(&file.w2, "w2")?,
            b2: file
                .b2
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::data("checkpoint: bad value in b2"))?,
            d: file.d,
            h: file.h,
            steps: file.steps,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json_string().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

/// Checkpoint document; parameters are decimal strings so that
/// save -> load -> save is byte-identical.
#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    d: usize,
    h: usize,
    steps: u64,
    vocab: Vec<char>,
    embed: Vec<String>,
    w1: Vec<String>,
    b1: Vec<String>,
    w2: Vec<String>,
    b2: String,
}

fn fmt_f64(v: &f64) -> String {
    format!("{v:?}")
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable binary cross-entropy straight from the logit.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Deterministic forward pass. `mask` replaces that position's embedding
/// with zeros before pooling; pooling over zero tokens is the zero vector.
pub fn forward(params: &ClassifierParams, x: &Sentence, mask: Option<usize>) -> ForwardResult {
    let d = params.d;
    let h = params.h;
    let mut pooled = vec![0.0; d];
    if !x.is_empty() {
        let n = x.len() as f64;
        for (row, count) in params.pooled_counts(x, mask) {
            let w = count as f64 / n;
            let base = row * d;
            for j in 0..d {
                pooled[j] += w * params.embed[base + j];
            }
        }
    }
    let mut representation = vec![0.0; h];
    for k in 0..h {
        let mut z = params.b1[k];
        let base = k * d;
        for j in 0..d {
            z += params.w1[base + j] * pooled[j];
        }
        representation[k] = z.tanh();
    }
    let prob = sigmoid(params.logit(&representation));
    ForwardResult { representation, prob, pooled }
}

/// Cosine of two representations plus their norms; `None` when either norm
/// is below the guard. The norm product is computed as one square root so
/// identical vectors give a cosine of exactly 1.
pub fn cosine_parts(a: &[f64], b: &[f64]) -> Option<(f64, f64, f64)> {
    let mut dot = 0.0;
    let mut na2 = 0.0;
    let mut nb2 = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na2 += x * x;
        nb2 += y * y;
    }
    let na = na2.sqrt();
    let nb = nb2.sqrt();
    if na < COSINE_NORM_GUARD || nb < COSINE_NORM_GUARD {
        return None;
    }
    let cos = (dot / (na2 * nb2).sqrt()).clamp(-1.0, 1.0);
    Some((cos, na, nb))
}

/// 1 - cos(a, b); zero when either representation is (near) zero.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    match cosine_parts(a, b) {
        Some((cos, _, _)) => 1.0 - cos,
        None => 0.0,
    }
}

impl Gradients {
    pub fn zeros_like(params: &ClassifierParams) -> Self {
        Gradients {
            embed: vec![0.0; params.embed.len()],
            w1: vec![0.0; params.w1.len()],
            b1: vec![0.0; params.b1.len()],
            w2: vec![0.0; params.w2.len()],
            b2: 0.0,
        }
    }

    /// The i-th gradient in the canonical parameter order of
    /// [`ClassifierParams::nudge`].
    pub fn flat(&self, i: usize) -> f64 {
        let mut i = i;
        for part in [&self.embed, &self.w1, &self.b1, &self.w2] {
            if i < part.len() {
                return part[i];
            }
            i -= part.len();
        }
        assert_eq!(i, 0, "gradient index out of range");
        self.b2
    }

    fn scale(&mut self, factor: f64) {
        for v in self
            .embed
            .iter_mut()
            .chain(self.w1.iter_mut())
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
        {
            *v *= factor;
        }
        self.b2 *= factor;
    }

    fn all_finite(&self) -> bool {
        self.embed
            .iter()
            .chain(self.w1.iter())
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(std::iter::once(&self.b2))
            .all(|v| v.is_finite())
    }
}

/// Backpropagates one branch (clean or noisy sentence) given the gradient
/// of the loss w.r.t. its logit and, optionally, w.r.t. its representation.
fn accumulate_branch(
    params: &ClassifierParams,
    x: &Sentence,
    fwd: &ForwardResult,
    dz2: f64,
    de_extra: Option<&[f64]>,
    g: &mut Gradients,
) {
    let d = params.d;
    let h = params.h;
    let mut delta1 = vec![0.0; h];
    for k in 0..h {
        let e = fwd.representation[k];
        let mut de = dz2 * params.w2[k];
        if let Some(extra) = de_extra {
            de += extra[k];
        }
        g.w2[k] += dz2 * e;
        delta1[k] = de * (1.0 - e * e);
        g.b1[k] += delta1[k];
        let base = k * d;
        for j in 0..d {
            g.w1[base + j] += delta1[k] * fwd.pooled[j];
        }
    }
    g.b2 += dz2;
    if x.is_empty() {
        return;
    }
    let mut du = vec![0.0; d];
    for k in 0..h {
        let base = k * d;
        for j in 0..d {
            du[j] += params.w1[base + j] * delta1[k];
        }
    }
    let n = x.len() as f64;
    for (row, count) in params.pooled_counts(x, None) {
        let w = count as f64 / n;
        let base = row * d;
        for j in 0..d {
            g.embed[base + j] += w * du[j];
        }
    }
}

/// Loss and exact analytic gradients over a batch.
///
/// Per sample: `L_stand` is the mean binary cross-entropy of the clean
/// probability (and of the noisy one when present, both against the shared
/// label); `L_sim` is the stability distance when a noisy copy is present.
/// The batch loss is the mean of `alpha * L_stand + (1 - alpha) * L_sim`.
/// With `alpha == 1` the stability code path is skipped entirely.
pub fn loss_and_grad(
    params: &ClassifierParams,
    batch: &[BatchSample<'_>],
    alpha: f64,
    mode: StabilityMode,
) -> Result<(LossBreakdown, Gradients)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(format!("alpha must be in [0,1], got {alpha}")));
    }
    if batch.is_empty() {
        return Err(Error::config("empty batch"));
    }
    let mut g = Gradients::zeros_like(params);
    let mut stand_sum = 0.0;
    let mut sim_sum = 0.0;
    let mut total_sum = 0.0;
    let h = params.h;

    for sample in batch {
        if sample.label > 1 {
            return Err(Error::config(format!("label must be 0 or 1, got {}", sample.label)));
        }
        let y = f64::from(sample.label);
        let fc = forward(params, sample.clean, None);
        let zc = params.logit(&fc.representation);
        let pc = fc.prob;

        let noisy = sample.noisy.map(|xn| {
            let f = forward(params, xn, None);
            let z = params.logit(&f.representation);
            (xn, f, z)
        });

        let bce_weight = if noisy.is_some() { 0.5 } else { 1.0 };
        let mut stand = bce_weight * bce_from_logit(zc, y);
        let mut dz2_c = alpha * bce_weight * (pc - y);
        let mut de_c: Option<Vec<f64>> = None;

        let mut sim = 0.0;
        if let Some((xn, fnr, zn)) = noisy {
            let pn = fnr.prob;
            stand += bce_weight * bce_from_logit(zn, y);
            let mut dz2_n = alpha * bce_weight * (pn - y);
            let mut de_n: Option<Vec<f64>> = None;

            if alpha < 1.0 {
                match mode {
                    StabilityMode::Representation => {
                        if let Some((cos, nc, nn)) =
                            cosine_parts(&fc.representation, &fnr.representation)
                        {
                            sim = 1.0 - cos;
                            let w = 1.0 - alpha;
                            let mut dc = vec![0.0; h];
                            let mut dn = vec![0.0; h];
                            for k in 0..h {
                                let ec = fc.representation[k];
                                let en = fnr.representation[k];
                                dc[k] = w * (cos * ec / (nc * nc) - en / (nc * nn));
                                dn[k] = w * (cos * en / (nn * nn) - ec / (nc * nn));
                            }
                            de_c = Some(dc);
                            de_n = Some(dn);
                        }
                    }
                    StabilityMode::Output => {
                        let diff = pc - pn;
                        sim = diff * diff;
                        let w = 1.0 - alpha;
                        dz2_c += w * 2.0 * diff * pc * (1.0 - pc);
                        dz2_n -= w * 2.0 * diff * pn * (1.0 - pn);
                    }
                }
            }
            accumulate_branch(params, xn, &fnr, dz2_n, de_n.as_deref(), &mut g);
        }

        accumulate_branch(params, sample.clean, &fc, dz2_c, de_c.as_deref(), &mut g);
        stand_sum += stand;
        sim_sum += sim;
        total_sum += alpha * stand + (1.0 - alpha) * sim;
    }

    let inv = 1.0 / batch.len() as f64;
    g.scale(inv);
    Ok((
        LossBreakdown {
            total: total_sum * inv,
            stand: stand_sum * inv,
            sim: sim_sum * inv,
        },
        g,
    ))
}

/// params <- params - lr * grad. Refuses to touch the parameters if any
/// gradient is non-finite.
pub fn sgd_step(params: &mut ClassifierParams, grads: &Gradients, lr: f64) -> Result<()> {
    if lr <= 0.0 {
        return Err(Error::config(format!("learning rate must be positive, got {lr}")));
    }
    if !grads.all_finite() {
        return Err(Error::data("non-finite gradient; parameters left untouched"));
    }
    for (p, g) in params.embed.iter_mut().zip(&grads.embed) {
        *p -= lr * g;
    }
    for (p, g) in params.w1.iter_mut().zip(&grads.w1) {
        *p -= lr * g;
    }
    for (p, g) in params.b1.iter_mut().zip(&grads.b1) {
        *p -= lr * g;
    }
    for (p, g) in params.w2.iter_mut().zip(&grads.w2) {
        *p -= lr * g;
    }
    params.b2 -= lr * grads.b2;
    params.steps += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::corpus::Tokenizer;
    use crate::rng::stream_rng;

    fn sent(text: &str, label: Option<u8>, id: u64) -> Sentence {
        Tokenizer::default().sentence(text, label, id)
    }

    fn tokens_of(s: &str) -> Vec<Token> {
        s.chars().map(Token).collect()
    }

    fn zeroed(vocab: &str, dims: Dims) -> ClassifierParams {
        let mut p = ClassifierParams::init(&tokens_of(vocab), dims, 0);
        let rows = p.vocab().len() + 1;
        for r in 0..rows {
            p.set_embedding(r, &vec![0.0; dims.embed]);
        }
        p.set_dense(
            &vec![0.0; dims.hidden * dims.embed],
            &vec![0.0; dims.hidden],
            &vec![0.0; dims.hidden],
            0.0,
        );
        p
    }

    #[test]
    fn zero_params_give_half_probability() {
        let p = zeroed("ab", Dims { embed: 3, hidden: 2 });
        let f = forward(&p, &sent("ab", None, 0), None);
        assert_eq!(f.prob, 0.5);
        assert!(f.representation.iter().all(|&v| v == 0.0));
        assert_eq!(p.predict(&sent("ab", None, 0), 0.5), 1, "p = threshold predicts 1");
    }

    #[test]
    fn masking_single_token_pools_to_zero() {
        let mut p = zeroed("a", Dims { embed: 2, hidden: 1 });
        p.set_embedding(0, &[3.0, -1.0]);
        let f = forward(&p, &sent("a", None, 0), Some(0));
        assert!(f.pooled.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_one_dim_forward() {
        let mut p = zeroed("a", Dims { embed: 1, hidden: 1 });
        p.set_embedding(0, &[2.0]);
        p.set_dense(&[1.0], &[0.0], &[1.0], 0.0);
        let f = forward(&p, &sent("a", None, 0), None);
        assert!((f.representation[0] - 0.96403).abs() < 1e-5);
        assert!((f.prob - 0.723927).abs() < 1e-5);
    }

    #[test]
    fn unknown_tokens_use_the_unk_row() {
        let mut p = zeroed("ab", Dims { embed: 1, hidden: 1 });
        p.set_embedding(2, &[5.0]); // UNK row
        p.set_dense(&[1.0], &[0.0], &[1.0], 0.0);
        let f_known = forward(&p, &sent("a", None, 0), None);
        let f_unknown = forward(&p, &sent("z", None, 0), None);
        assert!(f_unknown.prob > f_known.prob);
    }

    #[test]
    fn permutation_invariance_is_exact() {
        let p = ClassifierParams::init(&tokens_of("abcde"), Dims { embed: 5, hidden: 4 }, 9);
        let a = forward(&p, &sent("abcdeedcba", None, 0), None);
        let b = forward(&p, &sent("edcbaabcde", None, 0), None);
        assert_eq!(a.prob, b.prob);
        assert_eq!(a.representation, b.representation);
    }

    #[test]
    fn alpha_one_loss_is_plain_bce_with_zero_sim() {
        let p = ClassifierParams::init(&tokens_of("abc"), Dims { embed: 3, hidden: 3 }, 1);
        let clean = sent("abc", Some(1), 0);
        let noisy = sent("abb", Some(1), 0);
        let batch = [BatchSample { clean: &clean, noisy: Some(&noisy), label: 1 }];
        let (lb, _) = loss_and_grad(&p, &batch, 1.0, StabilityMode::Representation).unwrap();
        assert_eq!(lb.sim, 0.0);
        let pc = forward(&p, &clean, None).prob;
        let pn = forward(&p, &noisy, None).prob;
        let expected = 0.5 * (-(pc.ln()) - pn.ln());
        assert!((lb.stand - expected).abs() < 1e-12);
        assert!((lb.total - lb.stand).abs() < 1e-12);
    }

    #[test]
    fn identical_noisy_copy_has_exactly_zero_sim() {
        let p = ClassifierParams::init(&tokens_of("abc"), Dims::default(), 2);
        let clean = sent("abcab", Some(0), 0);
        let batch = [BatchSample { clean: &clean, noisy: Some(&clean), label: 0 }];
        let (lb, _) = loss_and_grad(&p, &batch, 0.5, StabilityMode::Representation).unwrap();
        assert_eq!(lb.sim, 0.0);
    }

    #[test]
    fn cosine_distance_range_and_symmetry() {
        let mut rng = stream_rng(3, 0, 0);
        for _ in 0..200 {
            let a: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let dab = cosine_distance(&a, &b);
            let dba = cosine_distance(&b, &a);
            assert!((0.0..=2.0 + 1e-12).contains(&dab));
            assert!((dab - dba).abs() < 1e-12);
            assert_eq!(cosine_distance(&a, &a), 0.0);
        }
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), 0.0, "zero-norm guard");
    }

    #[test]
    fn alpha_out_of_range_is_rejected() {
        let p = ClassifierParams::init(&tokens_of("ab"), Dims::default(), 0);
        let clean = sent("ab", Some(1), 0);
        let batch = [BatchSample { clean: &clean, noisy: None, label: 1 }];
        assert!(loss_and_grad(&p, &batch, 1.5, StabilityMode::Representation).is_err());
        assert!(loss_and_grad(&p, &batch, -0.1, StabilityMode::Representation).is_err());
    }

    #[test]
    fn sgd_zero_gradient_keeps_params() {
        let mut p = ClassifierParams::init(&tokens_of("ab"), Dims::default(), 0);
        let before = p.clone();
        let g = Gradients::zeros_like(&p);
        sgd_step(&mut p, &g, 0.1).unwrap();
        assert_eq!(p.embed, before.embed);
        assert_eq!(p.w1, before.w1);
        assert_eq!(p.b2, before.b2);
        assert_eq!(p.steps(), 1);
    }

    #[test]
    fn sgd_lr_one_with_grad_equal_params_zeroes_them() {
        let mut p = ClassifierParams::init(&tokens_of("ab"), Dims { embed: 2, hidden: 2 }, 5);
        let g = Gradients {
            embed: p.embed.clone(),
            w1: p.w1.clone(),
            b1: p.b1.clone(),
            w2: p.w2.clone(),
            b2: p.b2,
        };
        sgd_step(&mut p, &g, 1.0).unwrap();
        assert!(p.embed.iter().all(|&v| v == 0.0));
        assert!(p.w1.iter().all(|&v| v == 0.0));
        assert_eq!(p.b2, 0.0);
    }

    #[test]
    fn sgd_two_steps_on_quadratic() {
        // Minimizing x^2 with lr 0.1 from x=1: x <- x - 0.1 * 2x, twice -> 0.64.
        let mut p = zeroed("a", Dims { embed: 1, hidden: 1 });
        p.set_dense(&[0.0], &[0.0], &[0.0], 1.0);
        for _ in 0..2 {
            let mut g = Gradients::zeros_like(&p);
            g.b2 = 2.0 * p.b2;
            sgd_step(&mut p, &g, 0.1).unwrap();
        }
        assert!((p.b2 - 0.64).abs() < 1e-12);
    }

    #[test]
    fn sgd_rejects_non_finite_gradients_before_mutation() {
        let mut p = ClassifierParams::init(&tokens_of("ab"), Dims::default(), 0);
        let before = p.clone();
        let mut g = Gradients::zeros_like(&p);
        g.w1[3] = f64::NAN;
        assert!(sgd_step(&mut p, &g, 0.1).is_err());
        assert_eq!(p, before);
    }

    /// Central finite differences over every parameter of a tiny config.
    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let vocab = tokens_of("abcde");
        let mut params = ClassifierParams::init(&vocab, Dims { embed: 3, hidden: 3 }, 7);
        let clean1 = sent("abca", Some(1), 0);
        let noisy1 = sent("abcb", Some(1), 0);
        let clean2 = sent("de", Some(0), 1);
        let batch = [
            BatchSample { clean: &clean1, noisy: Some(&noisy1), label: 1 },
            BatchSample { clean: &clean2, noisy: None, label: 0 },
        ];
        // A couple of warmup steps so w2 and the biases leave zero and all
        // gradient paths are live at the checked point.
        for _ in 0..2 {
            let (_, g) = loss_and_grad(&params, &batch, 0.6, StabilityMode::Representation).unwrap();
            sgd_step(&mut params, &g, 0.5).unwrap();
        }
        for (alpha, mode) in [
            (0.6, StabilityMode::Representation),
            (0.6, StabilityMode::Output),
            (1.0, StabilityMode::Representation),
            (0.0, StabilityMode::Representation),
        ] {
            let (_, g) = loss_and_grad(&params, &batch, alpha, mode).unwrap();
            let loss_of = |p: &ClassifierParams| loss_and_grad(p, &batch, alpha, mode).unwrap().0.total;
            let step = 1e-4;
            let check = |analytic: f64, bump: &dyn Fn(&mut ClassifierParams, f64)| {
                let mut plus = params.clone();
                bump(&mut plus, step);
                let mut minus = params.clone();
                bump(&mut minus, -step);
                let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * step);
                let tol = 1e-4 * analytic.abs().max(numeric.abs()).max(1e-3);
                assert!(
                    (analytic - numeric).abs() <= tol.max(1e-7),
                    "alpha {alpha} mode {mode:?}: analytic {analytic} vs numeric {numeric}"
                );
            };
            for i in 0..params.embed.len() {
                check(g.embed[i], &move |p, eps| p.embed[i] += eps);
            }
            for i in 0..params.w1.len() {
                check(g.w1[i], &move |p, eps| p.w1[i] += eps);
            }
            for i in 0..params.b1.len() {
                check(g.b1[i], &move |p, eps| p.b1[i] += eps);
            }
            for i in 0..params.w2.len() {
                check(g.w2[i], &move |p, eps| p.w2[i] += eps);
            }
            check(g.b2, &|p, eps| p.b2 += eps);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_byte_identical() {
        let mut p = ClassifierParams::init(&tokens_of("ab乌"), Dims { embed: 4, hidden: 3 }, 11);
        p.mark_trained();
        let once = p.to_json_string();
        let reloaded = ClassifierParams::from_json_str(&once).unwrap();
        assert_eq!(reloaded, p);
        assert_eq!(reloaded.to_json_string(), once);
        assert_eq!(reloaded.steps(), 1);
    }
}
