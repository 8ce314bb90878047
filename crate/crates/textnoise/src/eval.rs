//! Metrics, noisy test-set construction, the noise-level sweep, and the
//! ablation harness comparing clean-only / Random / Naively-Merge /
//! framework variants across clean and noisy test sets.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::align::{build_confusion, ConfusionMatrix};
use crate::channels::{
    fit_context_channel, AttackChannel, AttackMode, NoiseChannel, RandomChannel, RuleChannel,
};
use crate::classifier::{ClassifierParams, StabilityMode};
use crate::corpus::{Dataset, ParallelPair};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::trainer::{
    build_pool, naive_merge_train, random_augment_train, robust_train, train_clean, NoisyPool,
    TrainConfig,
};

const SALT_NOISY_A: u64 = 0x4e41; // "NA"
const SALT_NOISY_B: u64 = 0x4e42; // "NB"
const SALT_RULE: u64 = 0x5255_4c45; // "RULE"
const SALT_ATTACK: u64 = 0x4154_4b31; // "ATK1"
const SALT_CONTEXT: u64 = 0x4358_5431; // "CXT1"
const SALT_SWEEP: u64 = 0x5357_5030; // "SWP0"

/// Binary classification counts and derived scores at threshold 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

/// Derives precision/recall/F1 from raw counts; zero denominators give 0.
pub fn metrics_from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Metrics {
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Metrics { precision, recall, f1, tp, fp, fn_, tn }
}

/// Standard binary metrics of a classifier over a labelled dataset.
pub fn evaluate(params: &ClassifierParams, dataset: &Dataset) -> Result<Metrics> {
    if dataset.is_empty() {
        return Err(Error::data("cannot evaluate on an empty dataset"));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for s in &dataset.sentences {
        let label = s
            .label
            .ok_or_else(|| Error::data(format!("sentence {} has no label", s.id)))?;
        let predicted = params.predict(s, 0.5);
        match (predicted, label) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => tn += 1,
        }
    }
    Ok(metrics_from_counts(tp, fp, fn_, tn))
}

/// Replaces every sentence with its injected copy; labels and ids are
/// preserved.
pub fn noisy_testset(dataset: &Dataset, channel: &dyn NoiseChannel) -> Result<Dataset> {
    let mut sentences = Vec::with_capacity(dataset.len());
    for s in &dataset.sentences {
        sentences.push(channel.inject(s)?);
    }
    Ok(Dataset::new(format!("{}+{}", dataset.name, channel.tag()), sentences))
}

/// One point of the noise-level sweep: metrics averaged over seeds at a
/// fixed random-edit rate.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub rate: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_seed: Vec<Metrics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
}

/// Evaluates a model on random-edit corruptions of the test set at each
/// rate, averaging metrics over the seed family.
pub fn noise_sweep(
    params: &ClassifierParams,
    dataset: &Dataset,
    rates: &[f64],
    seeds: &[u64],
) -> Result<SweepCurve> {
    if seeds.is_empty() {
        return Err(Error::config("noise_sweep needs at least one seed"));
    }
    if rates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("rates must be strictly increasing"));
    }
    if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::config("rates must lie in [0,1]"));
    }
    let vocab = dataset.vocab();
    let mut points = Vec::with_capacity(rates.len());
    for &rate in rates {
        let mut per_seed = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let channel = RandomChannel::new(rate, vocab.clone(), derive_seed(seed, SALT_SWEEP))?;
            let noisy = noisy_testset(dataset, &channel)?;
            per_seed.push(evaluate(params, &noisy)?);
        }
        let n = per_seed.len() as f64;
        points.push(SweepPoint {
            rate,
            precision: per_seed.iter().map(|m| m.precision).sum::<f64>() / n,
            recall: per_seed.iter().map(|m| m.recall).sum::<f64>() / n,
            f1: per_seed.iter().map(|m| m.f1).sum::<f64>() / n,
            per_seed,
        });
    }
    Ok(SweepCurve { points })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = (n + 1.0) / 2.0;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mean) * (b - mean);
        dx += (a - mean) * (a - mean);
        dy += (b - mean) * (b - mean);
    }
    if dx == 0.0 || dy == 0.0 {
        return 0.0;
    }
    num / (dx * dy).sqrt()
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// The trainer variants compared by the ablation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    CleanOnly,
    Random,
    NaiveMerge,
    OursNoMining,
    OursNoStability,
    Ours,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::CleanOnly,
        Variant::Random,
        Variant::NaiveMerge,
        Variant::OursNoMining,
        Variant::OursNoStability,
        Variant::Ours,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::CleanOnly => "clean-only",
            Variant::Random => "random",
            Variant::NaiveMerge => "naive-merge",
            Variant::OursNoMining => "ours-no-mining",
            Variant::OursNoStability => "ours-no-stability",
            Variant::Ours => "ours",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config(format!("unknown variant {s:?}")))
    }
}

/// Resolved settings for one ablation run. Serialized alongside reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub alpha: f64,
    pub beta: f64,
    /// Bigram interpolation weight of the context channel.
    pub lambda: f64,
    /// Identity smoothing of the fitted confusion matrix.
    pub floor: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs_clean: usize,
    pub epochs_robust: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub copies_per_channel: usize,
    /// Rate of the Random baseline and of the noisy-B test set.
    pub random_rate: f64,
    pub attack_mode: AttackMode,
    pub stability_on: StabilityMode,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            variants: Variant::ALL.to_vec(),
            seeds: vec![0, 1, 2, 3, 4],
            alpha: 0.75,
            beta: 0.25,
            lambda: 0.5,
            floor: 0.0,
            lr: 0.5,
            batch_size: 16,
            epochs_clean: 20,
            epochs_robust: 12,
            embed_dim: 32,
            hidden_dim: 32,
            copies_per_channel: 1,
            random_rate: 0.1,
            attack_mode: AttackMode::Argmax,
            stability_on: StabilityMode::Representation,
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::config("ablation needs at least one variant"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("ablation needs at least one seed"));
        }
        self.train_config(0, true).validate()
    }

    fn train_config(&self, seed: u64, clean: bool) -> TrainConfig {
        TrainConfig {
            alpha: self.alpha,
            beta: self.beta,
            lr: self.lr,
            epochs: if clean { self.epochs_clean } else { self.epochs_robust },
            batch_size: self.batch_size,
            seed,
            stability_on: self.stability_on,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub testset: String,
    pub seed: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationSummary {
    pub variant: String,
    pub testset: String,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub min_f1: f64,
    pub max_f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub summary: Vec<AblationSummary>,
}

pub const TESTSET_NAMES: [&str; 3] = ["clean", "noisy-a", "noisy-b"];

impl AblationReport {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row).expect("row serializes"));
            out.push('\n');
        }
        out
    }

    pub fn f1_of(&self, variant: Variant, testset: &str, seed: u64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.variant == variant.name() && r.testset == testset && r.seed == seed)
            .map(|r| r.f1)
    }

    pub fn mean_f1_of(&self, variant: Variant, testset: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.variant == variant.name() && s.testset == testset)
            .map(|s| s.mean_f1)
    }

    /// Fixed-width table: one row per variant, {clean, noisy-A, noisy-B}
    /// column groups with P/R/F1 means over seeds.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<18}", "variant"));
        for name in TESTSET_NAMES {
            out.push_str(&format!(" | {:^23}", name));
        }
        out.push('\n');
        out.push_str(&format!("{:<18}", ""));
        for _ in TESTSET_NAMES {
            out.push_str(&format!(" | {:>7} {:>7} {:>7}", "P", "R", "F1"));
        }
        out.push('\n');
        let dash_width = 18 + TESTSET_NAMES.len() * 26;
        out.push_str(&"-".repeat(dash_width));
        out.push('\n');
        let mut variants_seen: Vec<&str> = Vec::new();
        for s in &self.summary {
            if !variants_seen.contains(&s.variant.as_str()) {
                variants_seen.push(&s.variant);
            }
        }
        for variant in variants_seen {
            out.push_str(&format!("{variant:<18}"));
            for name in TESTSET_NAMES {
                match self.summary.iter().find(|s| s.variant == variant && s.testset == name) {
                    Some(s) => out.push_str(&format!(
                        " | {:>7.3} {:>7.3} {:>7.3}",
                        s.mean_precision, s.mean_recall, s.mean_f1
                    )),
                    None => out.push_str(&format!(" | {:>7} {:>7} {:>7}", "-", "-", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn trained_variant(
    variant: Variant,
    train: &Dataset,
    pool: &NoisyPool,
    clean_model: &ClassifierParams,
    cfg: &AblationConfig,
    seed: u64,
) -> Result<ClassifierParams> {
    let robust_cfg = cfg.train_config(seed, false);
    let model = match variant {
        Variant::CleanOnly => clean_model.clone(),
        Variant::Random => {
            random_augment_train(train, cfg.random_rate, &robust_cfg, clean_model, None)?.0
        }
        Variant::NaiveMerge => naive_merge_train(train, pool, &robust_cfg, clean_model, None)?.0,
        Variant::OursNoMining => {
            // Mining disabled: every pool pair participates each epoch.
            let mut c = robust_cfg;
            c.beta = 1.0;
            robust_train(train, pool, &c, clean_model, None)?.0
        }
        Variant::OursNoStability => {
            // Stability disabled: mining still on.
            let mut c = robust_cfg;
            c.alpha = 1.0;
            robust_train(train, pool, &c, clean_model, None)?.0
        }
        Variant::Ours => robust_train(train, pool, &robust_cfg, clean_model, None)?.0,
    };
    Ok(model)
}

/// Builds the three simulation channels used for pool construction: rule,
/// attack (guided by the clean model) and context.
pub fn standard_channels(
    matrix: &Arc<ConfusionMatrix>,
    context: &crate::channels::ContextChannel,
    clean_model: &ClassifierParams,
    cfg: &AblationConfig,
    seed: u64,
) -> Vec<Box<dyn NoiseChannel>> {
    vec![
        Box::new(RuleChannel::new(matrix.clone(), derive_seed(seed, SALT_RULE))),
        Box::new(AttackChannel::new(
            matrix.clone(),
            Arc::new(clean_model.clone()),
            None,
            cfg.attack_mode,
            derive_seed(seed, SALT_ATTACK),
        )),
        Box::new(context.clone().with_seed(derive_seed(seed, SALT_CONTEXT))),
    ]
}

/// Runs the full comparison grid: per variant and seed, train on the clean
/// data (plus channel noise where the variant calls for it) and evaluate
/// on the clean test set and two noisy ones (noisy-A: rule-channel noise
/// from the fitted matrix, the simulated-engine test; noisy-B: uniform
/// random edits at `random_rate`).
pub fn ablation_report(
    train: &Dataset,
    test: &Dataset,
    pairs: &[ParallelPair],
    cfg: &AblationConfig,
) -> Result<AblationReport> {
    cfg.validate()?;
    train.validate()?;
    test.validate()?;
    let matrix = Arc::new(build_confusion(pairs, cfg.floor)?);
    let context = fit_context_channel(pairs, cfg.lambda, cfg.floor, 0)?;
    let vocab = train.vocab();

    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        // Test sets are fixed per seed so every variant faces the same noise.
        let noisy_a = noisy_testset(
            test,
            &RuleChannel::new(matrix.clone(), derive_seed(seed, SALT_NOISY_A)),
        )?;
        let noisy_b = noisy_testset(
            test,
            &RandomChannel::new(cfg.random_rate, vocab.clone(), derive_seed(seed, SALT_NOISY_B))?,
        )?;
        let (clean_model, _) = train_clean(train, &cfg.train_config(seed, true), None)?;
        let channels = standard_channels(&matrix, &context, &clean_model, cfg, seed);
        let pool = build_pool(train, &channels, cfg.copies_per_channel)?;

        for &variant in &cfg.variants {
            eprintln!("[ablate] seed {seed} variant {variant}");
            let model = trained_variant(variant, train, &pool, &clean_model, cfg, seed)?;
            for (name, set) in [("clean", test), ("noisy-a", &noisy_a), ("noisy-b", &noisy_b)] {
                let m = evaluate(&model, set)?;
                rows.push(AblationRow {
                    variant: variant.name().to_string(),
                    testset: name.to_string(),
                    seed,
                    precision: m.precision,
                    recall: m.recall,
                    f1: m.f1,
                });
            }
        }
    }

    let mut summary = Vec::new();
    for &variant in &cfg.variants {
        for name in TESTSET_NAMES {
            let f1s: Vec<f64> = rows
                .iter()
                .filter(|r| r.variant == variant.name() && r.testset == name)
                .map(|r| r.f1)
                .collect();
            if f1s.is_empty() {
                continue;
            }
            let n = f1s.len() as f64;
            let sel = |f: fn(&AblationRow) -> f64| -> f64 {
                rows.iter()
                    .filter(|r| r.variant == variant.name() && r.testset == name)
                    .map(f)
                    .sum::<f64>()
                    / n
            };
            summary.push(AblationSummary {
                variant: variant.name().to_string(),
                testset: name.to_string(),
                mean_precision: sel(|r| r.precision),
                mean_recall: sel(|r| r.recall),
                mean_f1: f1s.iter().sum::<f64>() / n,
                min_f1: f1s.iter().copied().fold(f64::INFINITY, f64::min),
                max_f1: f1s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    Ok(AblationReport { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::align::Sym;
    use crate::classifier::Dims;
    use crate::corpus::{Sentence, Token, Tokenizer};
    use crate::rng::stream_rng;
    use rand::Rng;

    fn sent(text: &str, label: u8, id: u64) -> Sentence {
        Tokenizer::default().sentence(text, Some(label), id)
    }

    /// Scorer that predicts positive iff the sentence contains 'z'.
    fn z_detector() -> ClassifierParams {
        let vocab: Vec<Token> = "abz".chars().map(Token).collect();
        let mut p = ClassifierParams::init(&vocab, Dims { embed: 1, hidden: 1 }, 0);
        for (row, val) in [(0, -1.0), (1, -1.0), (2, 60.0), (3, -1.0)] {
            p.set_embedding(row, &[val]);
        }
        p.set_dense(&[1.0], &[0.0], &[8.0], -2.0);
        p.mark_trained();
        p
    }

    #[test]
    fn metrics_identities() {
        let m = metrics_from_counts(2, 1, 1, 4);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);

        let mut rng = stream_rng(4, 0, 0);
        for _ in 0..500 {
            let (tp, fp, fn_, tn) = (
                rng.gen_range(0..20),
                rng.gen_range(0..20),
                rng.gen_range(0..20),
                rng.gen_range(0..20),
            );
            let m = metrics_from_counts(tp, fp, fn_, tn);
            if m.precision + m.recall > 0.0 {
                let f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
                assert!((m.f1 - f1).abs() < 1e-12);
            } else {
                assert_eq!(m.f1, 0.0);
            }
            assert_eq!(m.tp + m.fp + m.fn_ + m.tn, tp + fp + fn_ + tn);
        }
    }

    #[test]
    fn zero_denominator_rule() {
        // No predicted positives, some actual positives.
        let m = metrics_from_counts(0, 0, 3, 5);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn evaluate_perfect_predictions() {
        let model = z_detector();
        let dataset = Dataset::new(
            "t",
            vec![sent("abz", 1, 0), sent("ab", 0, 1), sent("zza", 1, 2), sent("ba", 0, 3)],
        );
        let m = evaluate(&model, &dataset).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn evaluate_is_order_invariant() {
        let model = z_detector();
        let a = Dataset::new("a", vec![sent("abz", 1, 0), sent("ab", 0, 1), sent("az", 0, 2)]);
        let b = Dataset::new("b", vec![sent("az", 0, 0), sent("abz", 1, 1), sent("ab", 0, 2)]);
        let ma = evaluate(&model, &a).unwrap();
        let mb = evaluate(&model, &b).unwrap();
        assert_eq!(ma, mb);
    }

    #[test]
    fn evaluate_empty_dataset_errors() {
        let model = z_detector();
        assert!(evaluate(&model, &Dataset::new("e", Vec::new())).is_err());
    }

    #[test]
    fn noisy_testset_identity_channel_is_noop() {
        use crate::align::ConfusionMatrix;
        let dataset = Dataset::new("t", vec![sent("ab", 1, 0), sent("ba", 0, 1)]);
        let channel = RuleChannel::new(
            Arc::new(ConfusionMatrix::identity(&dataset.vocab())),
            0,
        );
        let noisy = noisy_testset(&dataset, &channel).unwrap();
        assert_eq!(noisy.sentences, dataset.sentences);
    }

    #[test]
    fn noisy_testset_rate_matches_target_within_ci() {
        // Aggregate edit rate of a 0.0342 random channel over a large corpus,
        // measured with the alignment-based rate estimator.
        use crate::align::noise_rate;
        use crate::corpus::ParallelPair;
        let mut sentences = Vec::new();
        for i in 0..1000u64 {
            sentences.push(sent(&"abcdefgh".repeat(4), 0, i));
        }
        let dataset = Dataset::new("t", sentences);
        let channel = RandomChannel::new(0.0342, dataset.vocab(), 77).unwrap();
        let noisy = noisy_testset(&dataset, &channel).unwrap();
        let pairs: Vec<ParallelPair> = dataset
            .sentences
            .iter()
            .zip(&noisy.sentences)
            .map(|(c, n)| ParallelPair {
                clean: Sentence::new(c.tokens.clone(), None, c.id),
                noisy: Sentence::new(n.tokens.clone(), None, n.id),
            })
            .collect();
        let rate = noise_rate(&pairs).unwrap();
        // 99% binomial CI around 0.0342 with n = 32,000 positions, plus some
        // slack because deletes next to inserts can merge under alignment.
        assert!((rate - 0.0342).abs() < 0.004, "realized rate {rate}");
        // Determinism: the same channel yields identical corpora.
        let again = noisy_testset(&dataset, &channel).unwrap();
        assert_eq!(noisy.sentences, again.sentences);
    }

    #[test]
    fn sweep_rate_zero_equals_clean_evaluation() {
        let model = z_detector();
        let dataset = Dataset::new("t", vec![sent("abz", 1, 0), sent("ab", 0, 1), sent("bza", 1, 2)]);
        let curve = noise_sweep(&model, &dataset, &[0.0], &[3, 4]).unwrap();
        let clean = evaluate(&model, &dataset).unwrap();
        assert_eq!(curve.points.len(), 1);
        assert!((curve.points[0].f1 - clean.f1).abs() < 1e-12);
    }

    #[test]
    fn sweep_rejects_bad_inputs() {
        let model = z_detector();
        let dataset = Dataset::new("t", vec![sent("abz", 1, 0)]);
        assert!(noise_sweep(&model, &dataset, &[0.0, 0.1], &[]).is_err());
        assert!(noise_sweep(&model, &dataset, &[0.1, 0.1], &[1]).is_err());
        assert!(noise_sweep(&model, &dataset, &[0.2, 0.1], &[1]).is_err());
    }

    #[test]
    fn sweep_is_deterministic() {
        let model = z_detector();
        let mut sentences = Vec::new();
        let mut rng = stream_rng(8, 0, 0);
        for i in 0..100u64 {
            let positive = rng.gen::<f64>() < 0.5;
            let base: String = (0..10).map(|_| if rng.gen::<f64>() < 0.5 { 'a' } else { 'b' }).collect();
            let text = if positive { format!("{base}z") } else { base };
            sentences.push(sent(&text, u8::from(positive), i));
        }
        let dataset = Dataset::new("t", sentences);
        let a = noise_sweep(&model, &dataset, &[0.0, 0.1, 0.2], &[0, 1]).unwrap();
        let b = noise_sweep(&model, &dataset, &[0.0, 0.1, 0.2], &[0, 1]).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn spearman_known_values() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]) + 1.0).abs() < 1e-12);
        // Monotone transform leaves the coefficient at 1.
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 8.0, 27.0, 64.0]) - 1.0).abs() < 1e-12);
        // Ties get average ranks.
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]);
        assert!(r > 0.9 && r <= 1.0);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn ablation_single_variant_single_seed_has_three_rows() {
        // Tiny end-to-end run: one variant, one seed, three test sets.
        let mut sentences = Vec::new();
        let mut rng = stream_rng(9, 0, 0);
        for i in 0..40u64 {
            let positive = i % 2 == 0;
            let base: String = (0..8).map(|_| if rng.gen::<f64>() < 0.5 { 'a' } else { 'b' }).collect();
            let text = if positive { format!("{base}z") } else { base };
            sentences.push(sent(&text, u8::from(positive), i));
        }
        let train = Dataset::new("train", sentences.clone());
        let test = Dataset::new(
            "test",
            sentences
                .iter()
                .enumerate()
                .map(|(i, s)| Sentence::new(s.tokens.clone(), s.label, i as u64))
                .collect(),
        );
        let tok = Tokenizer::default();
        let pairs = vec![
            crate::corpus::ParallelPair { clean: tok.sentence("abab", None, 0), noisy: tok.sentence("abab", None, 0) },
            crate::corpus::ParallelPair { clean: tok.sentence("bz", None, 1), noisy: tok.sentence("ba", None, 1) },
        ];
        let cfg = AblationConfig {
            variants: vec![Variant::Ours],
            seeds: vec![0],
            epochs_clean: 2,
            epochs_robust: 2,
            embed_dim: 4,
            hidden_dim: 4,
            ..AblationConfig::default()
        };
        let report = ablation_report(&train, &test, &pairs, &cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.summary.len(), 3);
        let table = report.render_table();
        assert!(table.contains("ours"));
        assert!(table.contains("noisy-a"));
        let jsonl = report.to_jsonl();
        assert_eq!(jsonl.lines().count(), 3);
        assert!(jsonl.lines().all(|l| l.contains("\"variant\"") && l.contains("\"f1\"")));
    }

    #[test]
    fn confusion_matrix_sym_ordering() {
        // Epsilon sorts last so vocab order is stable.
        let mut syms = vec![Sym::Eps, Sym::Tok(Token('b')), Sym::Tok(Token('a'))];
        syms.sort();
        assert_eq!(syms, vec![Sym::Tok(Token('a')), Sym::Tok(Token('b')), Sym::Eps]);
    }
}
