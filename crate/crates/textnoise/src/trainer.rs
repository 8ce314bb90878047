//! The robust training framework: clean fine-tuning, noisy-pool
//! construction from the channels, per-epoch hard-example mining by
//! representation distance, stability-loss training, and the Random /
//! Naively-Merge baseline trainers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::channels::{NoiseChannel, RandomChannel, SimRecord};
use crate::classifier::{
    cosine_distance, forward, loss_and_grad, sgd_step, BatchSample, ClassifierParams, Dims,
    StabilityMode,
};
use crate::corpus::{Dataset, Sentence, Tokenizer};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

const SALT_SHUFFLE: u64 = 0x5348_5546; // "SHUF"
const SALT_RANDOM_AUG: u64 = 0x5241_5547; // "RAUG"

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Stability weight; 1.0 disables the stability loss.
    pub alpha: f64,
    /// Hard-example fraction |D_hard| / M.
    pub beta: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub stability_on: StabilityMode,
    pub embed_dim: usize,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.75,
            beta: 0.25,
            lr: 0.1,
            epochs: 10,
            batch_size: 16,
            seed: 0,
            stability_on: StabilityMode::Representation,
            embed_dim: 32,
            hidden_dim: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha must be in [0,1], got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config(format!("beta must be in [0,1], got {}", self.beta)));
        }
        if self.lr <= 0.0 {
            return Err(Error::config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::config("model dimensions must be positive"));
        }
        Ok(())
    }

    fn dims(&self) -> Dims {
        Dims { embed: self.embed_dim, hidden: self.hidden_dim }
    }
}

/// One clean/noisy pair in the simulation pool, tagged with its source
/// channel. The noisy side was produced from the clean side and shares
/// its label.
#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub clean: Sentence,
    pub noisy: Sentence,
    pub label: u8,
    pub channel: String,
}

#[derive(Debug, Clone, Default)]
pub struct NoisyPool {
    pub entries: Vec<PoolEntry>,
}

impl NoisyPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for e in &self.entries {
            let record = SimRecord {
                id: e.clean.id,
                clean: e.clean.text(),
                noisy: e.noisy.text(),
                label: Some(e.label),
                channel: e.channel.clone(),
            };
            serde_json::to_writer(&mut out, &record).map_err(|err| Error::data(err.to_string()))?;
            out.write_all(b"\n").map_err(|err| Error::io(path, err))?;
        }
        out.flush().map_err(|err| Error::io(path, err))
    }

    pub fn read_jsonl(path: &Path, tokenizer: &Tokenizer) -> Result<NoisyPool> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (idx, line) in content.lines().enumerate() {
            let record: SimRecord = serde_json::from_str(line)
                .map_err(|e| Error::data(format!("{}: line {}: {e}", path.display(), idx + 1)))?;
            let label = record.label.ok_or_else(|| {
                Error::data(format!("{}: line {}: pool record without label", path.display(), idx + 1))
            })?;
            entries.push(PoolEntry {
                clean: tokenizer.sentence(&record.clean, Some(label), record.id),
                noisy: tokenizer.sentence(&record.noisy, Some(label), record.id),
                label,
                channel: record.channel,
            });
        }
        Ok(NoisyPool { entries })
    }

    pub fn extend(&mut self, other: NoisyPool) {
        self.entries.extend(other.entries);
    }
}

/// The hard examples chosen for one epoch: pool indices of the pairs with
/// the largest representation distance under the current model.
#[derive(Debug, Clone, PartialEq)]
pub struct HardSet {
    /// Selected pool indices in ascending order.
    pub selected: Vec<usize>,
    /// Distance of every pool entry at selection time.
    pub distances: Vec<f64>,
}

impl HardSet {
    pub fn mean_distance(&self) -> f64 {
        if self.distances.is_empty() {
            0.0
        } else {
            self.distances.iter().sum::<f64>() / self.distances.len() as f64
        }
    }

    pub fn mean_selected_distance(&self) -> f64 {
        if self.selected.is_empty() {
            0.0
        } else {
            self.selected.iter().map(|&i| self.distances[i]).sum::<f64>() / self.selected.len() as f64
        }
    }
}

/// Per-epoch training diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub stand_loss: f64,
    pub sim_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hard_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_selected_distance: Option<f64>,
}

/// Receives each finished epoch; used to persist run directories.
pub trait EpochSink {
    fn on_epoch(&mut self, metrics: &EpochMetrics, params: &ClassifierParams) -> Result<()>;
}

/// A run directory: resolved config, per-epoch metrics as jsonl, and a
/// checkpoint per epoch plus a final one.
pub struct RunDir {
    dir: PathBuf,
    metrics: BufWriter<File>,
}

impl RunDir {
    pub fn create(dir: &Path, resolved_config: &serde_json::Value) -> Result<RunDir> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let config_path = dir.join("config.json");
        let pretty = serde_json::to_string_pretty(resolved_config).expect("config serializes");
        fs::write(&config_path, pretty.as_bytes()).map_err(|e| Error::io(&config_path, e))?;
        let metrics_path = dir.join("metrics.jsonl");
        let metrics = BufWriter::new(File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?);
        Ok(RunDir { dir: dir.to_path_buf(), metrics })
    }

    pub fn finish(mut self, params: &ClassifierParams) -> Result<PathBuf> {
        self.metrics.flush().map_err(|e| Error::io(&self.dir, e))?;
        let path = self.dir.join("checkpoint_final.json");
        params.save(&path)?;
        Ok(path)
    }
}

impl EpochSink for RunDir {
    fn on_epoch(&mut self, metrics: &EpochMetrics, params: &ClassifierParams) -> Result<()> {
        let line = serde_json::to_string(metrics).expect("metrics serialize");
        self.metrics
            .write_all(line.as_bytes())
            .and_then(|_| self.metrics.write_all(b"\n"))
            .map_err(|e| Error::io(&self.dir, e))?;
        params.save(&self.dir.join(format!("checkpoint_epoch_{:03}.json", metrics.epoch)))
    }
}

struct TrainItem<'a> {
    clean: &'a Sentence,
    noisy: Option<&'a Sentence>,
    label: u8,
}

fn clean_items(dataset: &Dataset) -> Result<Vec<TrainItem<'_>>> {
    dataset
        .sentences
        .iter()
        .map(|s| {
            let label = s
                .label
                .ok_or_else(|| Error::data(format!("sentence {} has no label", s.id)))?;
            Ok(TrainItem { clean: s, noisy: None, label })
        })
        .collect()
}

/// One shuffled mini-batch pass over `items`; returns mean losses.
fn train_one_epoch(
    params: &mut ClassifierParams,
    items: &[TrainItem<'_>],
    alpha: f64,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<(f64, f64, f64)> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut stream_rng(cfg.seed, SALT_SHUFFLE, epoch as u64));
    let mut loss_sum = 0.0;
    let mut stand_sum = 0.0;
    let mut sim_sum = 0.0;
    for chunk in order.chunks(cfg.batch_size) {
        let batch: Vec<BatchSample<'_>> = chunk
            .iter()
            .map(|&i| BatchSample { clean: items[i].clean, noisy: items[i].noisy, label: items[i].label })
            .collect();
        let (lb, grads) = loss_and_grad(params, &batch, alpha, cfg.stability_on)?;
        sgd_step(params, &grads, cfg.lr)?;
        let w = chunk.len() as f64;
        loss_sum += lb.total * w;
        stand_sum += lb.stand * w;
        sim_sum += lb.sim * w;
    }
    let n = items.len() as f64;
    Ok((loss_sum / n, stand_sum / n, sim_sum / n))
}

fn emit(
    sink: &mut Option<&mut dyn EpochSink>,
    metrics: &EpochMetrics,
    params: &ClassifierParams,
    log: &mut Vec<EpochMetrics>,
) -> Result<()> {
    if let Some(s) = sink.as_mut() {
        s.on_epoch(metrics, params)?;
    }
    log.push(metrics.clone());
    Ok(())
}

/// Step 1: epochs of shuffled mini-batch BCE training from a fresh
/// seed-deterministic initialization (alpha forced to 1).
pub fn train_clean(
    dataset: &Dataset,
    cfg: &TrainConfig,
    mut sink: Option<&mut dyn EpochSink>,
) -> Result<(ClassifierParams, Vec<EpochMetrics>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::data("cannot train on an empty dataset"));
    }
    let mut params = ClassifierParams::init(&dataset.vocab(), cfg.dims(), cfg.seed);
    let items = clean_items(dataset)?;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, stand, sim) = train_one_epoch(&mut params, &items, 1.0, cfg, epoch)?;
        let metrics = EpochMetrics {
            epoch,
            loss,
            stand_loss: stand,
            sim_loss: sim,
            hard_count: None,
            mean_distance: None,
            mean_selected_distance: None,
        };
        emit(&mut sink, &metrics, &params, &mut log)?;
    }
    Ok((params, log))
}

/// Step 2: M = |dataset| x |channels| x copies noisy copies, each tagged
/// with its source channel.
pub fn build_pool(
    dataset: &Dataset,
    channels: &[Box<dyn NoiseChannel>],
    copies_per_channel: usize,
) -> Result<NoisyPool> {
    if channels.is_empty() {
        return Err(Error::config("build_pool needs at least one channel"));
    }
    if copies_per_channel == 0 {
        return Err(Error::config("copies_per_channel must be at least 1"));
    }
    let mut entries = Vec::with_capacity(dataset.len() * channels.len() * copies_per_channel);
    for channel in channels {
        for rep in 0..copies_per_channel {
            for s in &dataset.sentences {
                let label = s
                    .label
                    .ok_or_else(|| Error::data(format!("sentence {} has no label", s.id)))?;
                let noisy = channel.inject_rep(s, rep as u64)?;
                entries.push(PoolEntry {
                    clean: s.clone(),
                    noisy,
                    label,
                    channel: channel.tag().to_string(),
                });
            }
        }
    }
    Ok(NoisyPool { entries })
}

/// Steps 3-4: distance of every pool pair under the frozen current model,
/// then the top ceil(beta * M) by distance, ties broken by smaller index.
pub fn mine_hard(pool: &NoisyPool, params: &ClassifierParams, beta: f64) -> Result<HardSet> {
    let distances: Vec<f64> = pool
        .entries
        .iter()
        .map(|e| {
            let ec = forward(params, &e.clean, None).representation;
            let en = forward(params, &e.noisy, None).representation;
            cosine_distance(&ec, &en)
        })
        .collect();
    select_hard(distances, beta)
}

/// The selection half of `mine_hard`, exposed so distances computed
/// elsewhere can reuse the exact ranking rule.
pub fn select_hard(distances: Vec<f64>, beta: f64) -> Result<HardSet> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::config(format!("beta must be in [0,1], got {beta}")));
    }
    let m = distances.len();
    let k = ((beta * m as f64).ceil() as usize).min(m);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| distances[b].total_cmp(&distances[a]).then(a.cmp(&b)));
    let mut selected: Vec<usize> = order[..k].to_vec();
    selected.sort_unstable();
    Ok(HardSet { selected, distances })
}

/// Step 5 around an epoch loop: re-mine with the current model each epoch,
/// then train on the hard pairs plus the clean data. Hard pairs carry both
/// the BCE and the stability term; clean-only samples carry BCE only.
pub fn robust_train(
    dataset: &Dataset,
    pool: &NoisyPool,
    cfg: &TrainConfig,
    init: &ClassifierParams,
    mut sink: Option<&mut dyn EpochSink>,
) -> Result<(ClassifierParams, Vec<EpochMetrics>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::data("cannot train on an empty dataset"));
    }
    let mut params = init.clone();
    let base_items = clean_items(dataset)?;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let hard = mine_hard(pool, &params, cfg.beta)?;
        let mut items: Vec<TrainItem<'_>> = Vec::with_capacity(base_items.len() + hard.selected.len());
        items.extend(base_items.iter().map(|i| TrainItem { clean: i.clean, noisy: None, label: i.label }));
        items.extend(hard.selected.iter().map(|&i| {
            let e = &pool.entries[i];
            TrainItem { clean: &e.clean, noisy: Some(&e.noisy), label: e.label }
        }));
        let (loss, stand, sim) = train_one_epoch(&mut params, &items, cfg.alpha, cfg, epoch)?;
        let metrics = EpochMetrics {
            epoch,
            loss,
            stand_loss: stand,
            sim_loss: sim,
            hard_count: Some(hard.selected.len()),
            mean_distance: Some(hard.mean_distance()),
            mean_selected_distance: Some(hard.mean_selected_distance()),
        };
        emit(&mut sink, &metrics, &params, &mut log)?;
    }
    Ok((params, log))
}

/// Baseline: all clean plus all pool samples as independent rows, plain
/// BCE, no mining, no stability loss.
pub fn naive_merge_train(
    dataset: &Dataset,
    pool: &NoisyPool,
    cfg: &TrainConfig,
    init: &ClassifierParams,
    mut sink: Option<&mut dyn EpochSink>,
) -> Result<(ClassifierParams, Vec<EpochMetrics>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::data("cannot train on an empty dataset"));
    }
    let mut params = init.clone();
    let base_items = clean_items(dataset)?;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut items: Vec<TrainItem<'_>> = Vec::with_capacity(base_items.len() + pool.len());
        items.extend(base_items.iter().map(|i| TrainItem { clean: i.clean, noisy: None, label: i.label }));
        items.extend(
            pool.entries
                .iter()
                .map(|e| TrainItem { clean: &e.noisy, noisy: None, label: e.label }),
        );
        let (loss, stand, sim) = train_one_epoch(&mut params, &items, 1.0, cfg, epoch)?;
        let metrics = EpochMetrics {
            epoch,
            loss,
            stand_loss: stand,
            sim_loss: sim,
            hard_count: None,
            mean_distance: None,
            mean_selected_distance: None,
        };
        emit(&mut sink, &metrics, &params, &mut log)?;
    }
    Ok((params, log))
}

/// Baseline: one random-edit copy per sentence, then naive merging.
pub fn random_augment_train(
    dataset: &Dataset,
    rate: f64,
    cfg: &TrainConfig,
    init: &ClassifierParams,
    sink: Option<&mut dyn EpochSink>,
) -> Result<(ClassifierParams, Vec<EpochMetrics>)> {
    let channel = RandomChannel::new(rate, dataset.vocab(), derive_seed(cfg.seed, SALT_RANDOM_AUG))?;
    let channels: Vec<Box<dyn NoiseChannel>> = vec![Box::new(channel)];
    let pool = build_pool(dataset, &channels, 1)?;
    naive_merge_train(dataset, &pool, cfg, init, sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::align::ConfusionMatrix;
    use crate::channels::RuleChannel;
    use crate::corpus::Token;
    use crate::rng::stream_rng;
    use rand::Rng;

    /// Linearly separable toy task: positives contain the marker token 'z'.
    fn marker_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = stream_rng(seed, 0xda7a, 0);
        let background: Vec<char> = "abcdefgh".chars().collect();
        let mut sentences = Vec::with_capacity(n);
        for i in 0..n {
            let len = rng.gen_range(5..12);
            let mut tokens: Vec<Token> =
                (0..len).map(|_| Token(background[rng.gen_range(0..background.len())])).collect();
            let positive = rng.gen::<f64>() < 0.4;
            if positive {
                let at = rng.gen_range(0..=tokens.len());
                tokens.insert(at, Token('z'));
            }
            sentences.push(Sentence::new(tokens, Some(u8::from(positive)), i as u64));
        }
        Dataset::new("marker", sentences)
    }

    fn quick_cfg(seed: u64, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            seed,
            lr: 0.5,
            embed_dim: 8,
            hidden_dim: 8,
            ..TrainConfig::default()
        }
    }

    fn training_accuracy(params: &ClassifierParams, dataset: &Dataset) -> f64 {
        let correct = dataset
            .sentences
            .iter()
            .filter(|s| params.predict(s, 0.5) == s.label.unwrap())
            .count();
        correct as f64 / dataset.len() as f64
    }

    #[test]
    fn clean_training_fits_separable_task() {
        let dataset = marker_dataset(500, 3);
        let (params, log) = train_clean(&dataset, &quick_cfg(1, 20), None).unwrap();
        assert_eq!(log.len(), 20);
        assert!(log.last().unwrap().loss < log.first().unwrap().loss);
        let acc = training_accuracy(&params, &dataset);
        assert!(acc >= 0.98, "training accuracy {acc}");
        // Calibrated fixture is also the `predict` accuracy contract.
        assert!(acc >= 0.95);
    }

    #[test]
    fn zero_epochs_is_rejected() {
        let dataset = marker_dataset(10, 0);
        let mut cfg = quick_cfg(0, 1);
        cfg.epochs = 0;
        let err = train_clean(&dataset, &cfg, None).unwrap_err();
        assert!(err.to_string().contains("epochs"));
    }

    #[test]
    fn clean_training_is_bit_reproducible() {
        let dataset = marker_dataset(120, 5);
        let (a, _) = train_clean(&dataset, &quick_cfg(9, 4), None).unwrap();
        let (b, _) = train_clean(&dataset, &quick_cfg(9, 4), None).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
    }

    fn identity_pool(dataset: &Dataset) -> NoisyPool {
        let vocab = dataset.vocab();
        let channel = RuleChannel::new(Arc::new(ConfusionMatrix::identity(&vocab)), 0);
        let channels: Vec<Box<dyn NoiseChannel>> = vec![Box::new(channel)];
        build_pool(dataset, &channels, 1).unwrap()
    }

    #[test]
    fn pool_size_is_product_of_factors() {
        let dataset = marker_dataset(100, 1);
        let vocab = dataset.vocab();
        let channels: Vec<Box<dyn NoiseChannel>> = vec![
            Box::new(RuleChannel::new(Arc::new(ConfusionMatrix::identity(&vocab)), 0)),
            Box::new(RuleChannel::new(Arc::new(ConfusionMatrix::identity(&vocab)), 1)),
            Box::new(RuleChannel::new(Arc::new(ConfusionMatrix::identity(&vocab)), 2)),
        ];
        let pool = build_pool(&dataset, &channels, 2).unwrap();
        assert_eq!(pool.len(), 600);
        assert!(pool.entries.iter().all(|e| e.clean == e.noisy), "identity channels");
        assert!(pool.entries.iter().all(|e| e.clean.label == Some(e.label)));
    }

    #[test]
    fn pool_serialization_is_deterministic() {
        use tempfile::tempdir;
        let dataset = marker_dataset(50, 2);
        let dir = tempdir().unwrap();
        let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        identity_pool(&dataset).write_jsonl(&a).unwrap();
        identity_pool(&dataset).write_jsonl(&b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        let reread = NoisyPool::read_jsonl(&a, &Tokenizer::default()).unwrap();
        assert_eq!(reread.len(), 50);
    }

    #[test]
    fn mining_matches_hand_example() {
        // Distances [.9, .1, .5, .9, .3], beta 0.4 -> ceil(2) kept, tie on
        // 0.9 resolved toward the smaller index: {0, 3}.
        let hard = select_hard(vec![0.9, 0.1, 0.5, 0.9, 0.3], 0.4).unwrap();
        assert_eq!(hard.selected, vec![0, 3]);
    }

    #[test]
    fn mining_beta_bounds() {
        let dataset = marker_dataset(20, 4);
        let pool = identity_pool(&dataset);
        let params = ClassifierParams::init(&dataset.vocab(), Dims { embed: 4, hidden: 4 }, 0);
        assert_eq!(mine_hard(&pool, &params, 1.0).unwrap().selected.len(), 20);
        assert!(mine_hard(&pool, &params, 0.0).unwrap().selected.is_empty());
        assert!(mine_hard(&pool, &params, 1.5).is_err());
    }

    #[test]
    fn mining_is_monotone_in_beta() {
        let dataset = marker_dataset(60, 8);
        let vocab = dataset.vocab();
        let mut rows = std::collections::BTreeMap::new();
        use crate::align::Sym;
        rows.insert(Sym::Tok(Token('a')), vec![(Sym::Tok(Token('b')), 1.0)]);
        rows.insert(Sym::Tok(Token('c')), vec![(Sym::Tok(Token('d')), 0.5), (Sym::Tok(Token('c')), 0.5)]);
        let m = Arc::new(ConfusionMatrix::from_probs(rows).unwrap());
        let channels: Vec<Box<dyn NoiseChannel>> = vec![Box::new(RuleChannel::new(m, 3))];
        let pool = build_pool(&dataset, &channels, 1).unwrap();
        let params = ClassifierParams::init(&vocab, Dims { embed: 6, hidden: 5 }, 1);
        let mut previous: Vec<usize> = Vec::new();
        for beta in [0.1, 0.3, 0.5, 0.8, 1.0] {
            let hard = mine_hard(&pool, &params, beta).unwrap();
            for idx in &previous {
                assert!(hard.selected.contains(idx), "beta {beta} dropped index {idx}");
            }
            // Boundary invariant: worst kept >= best dropped.
            let selected: std::collections::HashSet<usize> = hard.selected.iter().copied().collect();
            let min_sel = hard.selected.iter().map(|&i| hard.distances[i]).fold(f64::INFINITY, f64::min);
            let max_unsel = (0..pool.len())
                .filter(|i| !selected.contains(i))
                .map(|i| hard.distances[i])
                .fold(f64::NEG_INFINITY, f64::max);
            if max_unsel.is_finite() {
                assert!(min_sel >= max_unsel);
            }
            previous = hard.selected;
        }
    }

    #[test]
    fn framework_collapses_to_clean_continuation() {
        // (alpha=1, beta=0) robust training must be bit-identical to the
        // clean-only continuation (naive merge with an empty pool).
        let dataset = marker_dataset(80, 6);
        let (init, _) = train_clean(&dataset, &quick_cfg(2, 3), None).unwrap();
        let mut cfg = quick_cfg(2, 4);
        cfg.alpha = 1.0;
        cfg.beta = 0.0;
        let pool = identity_pool(&dataset);
        let (a, _) = robust_train(&dataset, &pool, &cfg, &init, None).unwrap();
        let (b, _) = naive_merge_train(&dataset, &NoisyPool::default(), &cfg, &init, None).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
    }

    #[test]
    fn identity_pool_has_zero_distances_and_zero_sim() {
        let dataset = marker_dataset(40, 9);
        let (init, _) = train_clean(&dataset, &quick_cfg(3, 3), None).unwrap();
        let pool = identity_pool(&dataset);
        let mut cfg = quick_cfg(3, 2);
        cfg.alpha = 0.5;
        cfg.beta = 0.5;
        let (_, log) = robust_train(&dataset, &pool, &cfg, &init, None).unwrap();
        for m in &log {
            assert_eq!(m.mean_distance, Some(0.0));
            assert_eq!(m.sim_loss, 0.0);
        }
    }

    #[test]
    fn naive_merge_with_duplicate_pool_matches_doubled_clean_loss_shape() {
        let dataset = marker_dataset(60, 10);
        let (init, _) = train_clean(&dataset, &quick_cfg(4, 2), None).unwrap();
        let pool = identity_pool(&dataset);
        let cfg = quick_cfg(4, 3);
        let (_, log) = naive_merge_train(&dataset, &pool, &cfg, &init, None).unwrap();
        assert_eq!(log.len(), 3);
        // Every optimizer step sees a labelled sample; losses stay finite.
        assert!(log.iter().all(|m| m.loss.is_finite()));
    }

    #[test]
    fn random_augment_rate_zero_pool_equals_clean_copies() {
        let dataset = marker_dataset(30, 11);
        let channel = RandomChannel::new(0.0, dataset.vocab(), 0).unwrap();
        let channels: Vec<Box<dyn NoiseChannel>> = vec![Box::new(channel)];
        let pool = build_pool(&dataset, &channels, 1).unwrap();
        assert!(pool.entries.iter().all(|e| e.clean == e.noisy));
        let (init, _) = train_clean(&dataset, &quick_cfg(5, 2), None).unwrap();
        let (params, _) = random_augment_train(&dataset, 0.0, &quick_cfg(5, 2), &init, None).unwrap();
        assert!(params.steps() > init.steps());
    }

    #[test]
    fn run_dir_writes_config_metrics_and_checkpoints() {
        use tempfile::tempdir;
        let dataset = marker_dataset(30, 12);
        let dir = tempdir().unwrap();
        let run = dir.path().join("run");
        let mut sink = RunDir::create(&run, &serde_json::json!({"stage": "train-clean"})).unwrap();
        let cfg = quick_cfg(6, 2);
        let (params, log) = train_clean(&dataset, &cfg, Some(&mut sink)).unwrap();
        sink.finish(&params).unwrap();
        assert!(run.join("config.json").is_file());
        assert!(run.join("metrics.jsonl").is_file());
        assert!(run.join("checkpoint_epoch_000.json").is_file());
        assert!(run.join("checkpoint_epoch_001.json").is_file());
        assert!(run.join("checkpoint_final.json").is_file());
        let metrics = fs::read_to_string(run.join("metrics.jsonl")).unwrap();
        assert_eq!(metrics.lines().count(), log.len());
        let reloaded = ClassifierParams::load(&run.join("checkpoint_final.json")).unwrap();
        assert_eq!(reloaded.to_json_string(), params.to_json_string());
    }
}
