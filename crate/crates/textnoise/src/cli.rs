//! Command-line pipeline with reproducible, file-based stages.
//!
//! Every stage writes its fully resolved configuration next to its output
//! (`<out>.config.json`, or `config.json` inside run directories), so any
//! artifact can be regenerated from its config alone. Exit codes: 0 ok,
//! 1 usage error, 2 data error. Messages go to stderr, data to files or
//! stdout.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::align::{build_confusion, noise_rate, ConfusionMatrix};
use crate::benchmark::{self, BenchmarkSpec};
use crate::channels::{
    fit_context_channel, AttackChannel, AttackMode, FileChannel, NoiseChannel, RandomChannel,
    RuleChannel, SimRecord,
};
use crate::classifier::{ClassifierParams, StabilityMode};
use crate::corpus::{
    load_dataset, load_parallel, save_dataset_jsonl, save_parallel_tsv, DataFormat, Dataset,
    Tokenizer, TokenizerMode,
};
use crate::error::Error;
use crate::eval::{
    ablation_report, evaluate, noise_sweep, AblationConfig, Variant,
};
use crate::rng::derive_seed;
use crate::trainer::{
    naive_merge_train, random_augment_train, robust_train, train_clean, NoisyPool, RunDir,
    TrainConfig,
};

const SALT_SIM: u64 = 0x5349_4d30; // "SIM0"

enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => CliError::Usage(format!("invalid configuration: {msg}")),
            other => CliError::Data(other),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let result = match cli.cmd {
        Cmd::BuildConfusion(args) => build_confusion_cmd(args),
        Cmd::Simulate(args) => simulate_cmd(args),
        Cmd::TrainClean(args) => train_clean_cmd(args),
        Cmd::TrainRobust(args) => train_robust_cmd(args),
        Cmd::TrainBaseline(args) => train_baseline_cmd(args),
        Cmd::Evaluate(args) => evaluate_cmd(args),
        Cmd::Sweep(args) => sweep_cmd(args),
        Cmd::Ablate(args) => ablate_cmd(args),
        Cmd::GenBenchmark(args) => gen_benchmark_cmd(args),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[derive(Parser)]
#[command(
    name = "textnoise",
    version,
    about = "OCR-style noise simulation and noise-robust classifier training"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate a confusion matrix from a clean<TAB>noisy parallel corpus.
    BuildConfusion(BuildConfusionArgs),
    /// Run a noise channel over a dataset, writing clean/noisy records.
    Simulate(SimulateArgs),
    /// Train the classifier on clean data from scratch.
    TrainClean(TrainCleanArgs),
    /// Robust training: hard-example mining plus stability loss.
    TrainRobust(TrainRobustArgs),
    /// Baseline trainers: naive merging or random augmentation.
    TrainBaseline(TrainBaselineArgs),
    /// Precision/recall/F1 of a checkpoint on a labelled dataset.
    Evaluate(EvaluateArgs),
    /// F1 against noise rate over random-edit corruptions.
    Sweep(SweepArgs),
    /// The full variant-comparison grid on one benchmark config.
    Ablate(AblateArgs),
    /// Generate the shipped synthetic benchmark.
    GenBenchmark(GenBenchmarkArgs),
}

fn merge<T: Clone>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn read_config_file<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(Error::io(path, e)))?;
    serde_json::from_str(&text)
        .map_err(|e| usage(format!("{}: bad config file: {e}", path.display())))
}

fn write_sidecar_config<T: Serialize>(out: &Path, resolved: &T) -> CliResult {
    let path = PathBuf::from(format!("{}.config.json", out.display()));
    let pretty = serde_json::to_string_pretty(resolved).expect("config serializes");
    fs::write(&path, pretty).map_err(|e| CliError::Data(Error::io(&path, e)))?;
    Ok(())
}

fn tokenizer_of(mode: Option<TokenizerMode>) -> Tokenizer {
    Tokenizer::new(mode.unwrap_or(TokenizerMode::ByteFaithful))
}

fn load_dataset_auto(path: &Path, format: Option<DataFormat>, tok: &Tokenizer) -> CliResult<Dataset> {
    let format = format.unwrap_or_else(|| DataFormat::from_path(path));
    Ok(load_dataset(path, format, tok)?)
}

fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| usage(format!("missing required option --{flag}")))
}

fn install_workers(workers: Option<usize>) -> CliResult {
    if let Some(n) = workers {
        if n == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("worker pool: {e}")))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// build-confusion

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default)]
struct BuildConfusionArgs {
    /// JSON file with these options; explicit flags win.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Parallel corpus, one clean<TAB>noisy pair per line.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Output matrix path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Identity smoothing mass in [0,1).
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long, value_enum)]
    tokenizer: Option<TokenizerMode>,
}

#[derive(Serialize)]
struct BuildConfusionResolved {
    stage: &'static str,
    pairs: PathBuf,
    out: PathBuf,
    floor: f64,
    tokenizer: TokenizerMode,
}

fn build_confusion_cmd(args: BuildConfusionArgs) -> CliResult {
    let file: BuildConfusionArgs = match &args.config {
        Some(p) => read_config_file(p)?,
        None => BuildConfusionArgs::default(),
    };
    let pairs_path = require(merge(args.pairs, file.pairs), "pairs")?;
    let out = require(merge(args.out, file.out), "out")?;
    let floor = merge(args.floor, file.floor).unwrap_or(0.0);
    let mode = merge(args.tokenizer, file.tokenizer).unwrap_or(TokenizerMode::ByteFaithful);

    let tokenizer = Tokenizer::new(mode);
    let pairs = load_parallel(&pairs_path, &tokenizer)?;
    let matrix = build_confusion(&pairs, floor)?;
    matrix.save(&out)?;
    let resolved = BuildConfusionResolved {
        stage: "build-confusion",
        pairs: pairs_path.clone(),
        out: out.clone(),
        floor,
        tokenizer: mode,
    };
    write_sidecar_config(&out, &resolved)?;
    eprintln!(
        "fitted confusion matrix from {} pairs (noise rate {:.4}, vocab {})",
        pairs.len(),
        noise_rate(&pairs)?,
        matrix.vocab().len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

#[derive(clap::ValueEnum, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Debug)]
#[serde(rename_all = "lowercase")]
enum ChannelKind {
    Rule,
    Attack,
    Context,
    Random,
    File,
}

#[derive(clap::ValueEnum, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Debug)]
#[serde(rename_all = "lowercase")]
enum SimulateEmit {
    /// jsonl records {id, clean, noisy, label, channel}.
    Pairs,
    /// A plain jsonl dataset of the noisy sentences (labels required).
    Dataset,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default)]
struct SimulateArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    channel: Option<ChannelKind>,
    /// Input dataset (jsonl or tsv).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Confusion matrix (rule/attack channels).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Classifier checkpoint scoring the attack.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    max_edits: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<AttackMode>,
    /// Parallel corpus for fitting the context channel.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    floor: Option<f64>,
    /// Edit rate of the random channel.
    #[arg(long)]
    rate: Option<f64>,
    /// Pre-generated clean<TAB>noisy tsv (file channel).
    #[arg(long)]
    noisy_file: Option<PathBuf>,
    /// Independent noisy copies per sentence.
    #[arg(long)]
    copies: Option<usize>,
    #[arg(long, value_enum)]
    emit: Option<SimulateEmit>,
    #[arg(long)]
    format: Option<DataFormat>,
    #[arg(long, value_enum)]
    tokenizer: Option<TokenizerMode>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Serialize)]
struct SimulateResolved {
    stage: &'static str,
    channel: ChannelKind,
    input: PathBuf,
    out: PathBuf,
    seed: u64,
    matrix: Option<PathBuf>,
    model: Option<PathBuf>,
    max_edits: Option<usize>,
    mode: AttackMode,
    pairs: Option<PathBuf>,
    lambda: f64,
    floor: f64,
    rate: f64,
    noisy_file: Option<PathBuf>,
    copies: usize,
    emit: SimulateEmit,
    tokenizer: TokenizerMode,
}

fn build_channel(resolved: &SimulateResolved, tokenizer: Tokenizer) -> CliResult<Box<dyn NoiseChannel>> {
    let channel_seed = derive_seed(resolved.seed, SALT_SIM);
    Ok(match resolved.channel {
        ChannelKind::Rule => {
            let path = resolved.matrix.as_ref().ok_or_else(|| usage("rule channel needs --matrix"))?;
            Box::new(RuleChannel::new(Arc::new(ConfusionMatrix::load(path)?), channel_seed))
        }
        ChannelKind::Attack => {
            let matrix = resolved.matrix.as_ref().ok_or_else(|| usage("attack channel needs --matrix"))?;
            let model = resolved.model.as_ref().ok_or_else(|| usage("attack channel needs --model"))?;
            Box::new(AttackChannel::new(
                Arc::new(ConfusionMatrix::load(matrix)?),
                Arc::new(ClassifierParams::load(model)?),
                resolved.max_edits,
                resolved.mode,
                channel_seed,
            ))
        }
        ChannelKind::Context => {
            let path = resolved.pairs.as_ref().ok_or_else(|| usage("context channel needs --pairs"))?;
            let pairs = load_parallel(path, &tokenizer)?;
            Box::new(fit_context_channel(&pairs, resolved.lambda, resolved.floor, channel_seed)?)
        }
        ChannelKind::Random => {
            let dataset = load_dataset_auto(&resolved.input, None, &tokenizer)?;
            Box::new(RandomChannel::new(resolved.rate, dataset.vocab(), channel_seed)?)
        }
        ChannelKind::File => {
            let path = resolved
                .noisy_file
                .as_ref()
                .ok_or_else(|| usage("file channel needs --noisy-file"))?;
            Box::new(FileChannel::from_tsv(path, tokenizer)?)
        }
    })
}

fn simulate_cmd(args: SimulateArgs) -> CliResult {
    let file: SimulateArgs = match &args.config {
        Some(p) => read_config_file(p)?,
        None => SimulateArgs::default(),
    };
    let channel = require(merge(args.channel, file.channel), "channel")?;
    let input = require(merge(args.input, file.input), "in")?;
    let out = require(merge(args.out, file.out), "out")?;
    let seed = require(merge(args.seed, file.seed), "seed")?;
    let mode = merge(args.tokenizer, file.tokenizer).unwrap_or(TokenizerMode::ByteFaithful);
    let resolved = SimulateResolved {
        stage: "simulate",
        channel,
        input: input.clone(),
        out: out.clone(),
        seed,
        matrix: merge(args.matrix, file.matrix),
        model: merge(args.model, file.model),
        max_edits: merge(args.max_edits, file.max_edits),
        mode: merge(args.mode, file.mode).unwrap_or(AttackMode::Argmax),
        pairs: merge(args.pairs, file.pairs),
        lambda: merge(args.lambda, file.lambda).unwrap_or(0.5),
        floor: merge(args.floor, file.floor).unwrap_or(0.0),
        rate: merge(args.rate, file.rate).unwrap_or(0.1),
        noisy_file: merge(args.noisy_file, file.noisy_file),
        copies: merge(args.copies, file.copies).unwrap_or(1),
        emit: merge(args.emit, file.emit).unwrap_or(SimulateEmit::Pairs),
        tokenizer: mode,
    };
    if resolved.copies == 0 {
        return Err(usage("--copies must be at least 1"));
    }
    install_workers(merge(args.workers, file.workers))?;

    let tokenizer = Tokenizer::new(mode);
    let dataset = load_dataset_auto(&input, merge(args.format, file.format), &tokenizer)?;
    let channel = build_channel(&resolved, tokenizer)?;

    use rayon::prelude::*;
    let mut lines: Vec<String> = Vec::new();
    for rep in 0..resolved.copies {
        let batch: Result<Vec<String>, Error> = dataset
            .sentences
            .par_iter()
            .map(|s| {
                let noisy = channel.inject_rep(s, rep as u64)?;
                let line = match resolved.emit {
                    SimulateEmit::Pairs => serde_json::to_string(&SimRecord {
                        id: s.id,
                        clean: s.text(),
                        noisy: noisy.text(),
                        label: s.label,
                        channel: channel.tag().to_string(),
                    })
                    .expect("record serializes"),
                    SimulateEmit::Dataset => serde_json::to_string(&serde_json::json!({
                        "text": noisy.text(),
                        "label": s.label,
                    }))
                    .expect("record serializes"),
                };
                Ok(line)
            })
            .collect();
        lines.extend(batch?);
    }
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    fs::write(&out, body).map_err(|e| CliError::Data(Error::io(&out, e)))?;
    write_sidecar_config(&out, &resolved)?;
    eprintln!(
        "simulated {} records through the {} channel",
        dataset.len() * resolved.copies,
        channel.tag()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train-clean / train-robust / train-baseline

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default)]
struct TrainCommonArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Labelled training data (jsonl or tsv).
    #[arg(long)]
    train: Option<PathBuf>,
    /// Run directory for config/metrics/checkpoints.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    stability: Option<StabilityMode>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, value_enum)]
    tokenizer: Option<TokenizerMode>,
}

impl TrainCommonArgs {
    fn merged(self, file: TrainCommonArgs) -> TrainCommonArgs {
        TrainCommonArgs {
            config: None,
            train: merge(self.train, file.train),
            out: merge(self.out, file.out),
            seed: merge(self.seed, file.seed),
            epochs: merge(self.epochs, file.epochs),
            lr: merge(self.lr, file.lr),
            batch_size: merge(self.batch_size, file.batch_size),
            alpha: merge(self.alpha, file.alpha),
            beta: merge(self.beta, file.beta),
            stability: merge(self.stability, file.stability),
            dim: merge(self.dim, file.dim),
            hidden: merge(self.hidden, file.hidden),
            tokenizer: merge(self.tokenizer, file.tokenizer),
        }
    }

    fn train_config(&self) -> CliResult<TrainConfig> {
        let defaults = TrainConfig::default();
        Ok(TrainConfig {
            alpha: self.alpha.unwrap_or(defaults.alpha),
            beta: self.beta.unwrap_or(defaults.beta),
            lr: self.lr.unwrap_or(defaults.lr),
            epochs: self.epochs.unwrap_or(defaults.epochs),
            batch_size: self.batch_size.unwrap_or(defaults.batch_size),
            seed: require(self.seed, "seed")?,
            stability_on: self.stability.unwrap_or(defaults.stability_on),
            embed_dim: self.dim.unwrap_or(defaults.embed_dim),
            hidden_dim: self.hidden.unwrap_or(defaults.hidden_dim),
        })
    }
}

#[derive(Serialize)]
struct TrainResolved<'a> {
    stage: &'a str,
    train: &'a Path,
    out: &'a Path,
    tokenizer: TokenizerMode,
    #[serde(flatten)]
    config: &'a TrainConfig,
    pools: &'a [PathBuf],
    init: Option<&'a Path>,
    variant: Option<&'a str>,
    rate: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default)]
struct TrainCleanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: TrainCommonArgs,
}

fn train_clean_cmd(args: TrainCleanArgs) -> CliResult {
    let file: TrainCleanArgs = match &args.common.config {
        Some(p) => read_config_file(p)?,
        None => TrainCleanArgs::default(),
    };
    let common = args.common.merged(file.common);
    let mut cfg = common.train_config()?;
    cfg.alpha = 1.0;
    cfg.beta = 0.0;
    let train_path = require(common.train.clone(), "train")?;
    let out = require(common.out.clone(), "out")?;
    let mode = common.tokenizer.unwrap_or(TokenizerMode::ByteFaithful);
    let tokenizer = Tokenizer::new(mode);
    let dataset = load_dataset_auto(&train_path, None, &tokenizer)?;
    dataset.validate()?;

    let resolved = TrainResolved {
        stage: "train-clean",
        train: &train_path,
        out: &out,
        tokenizer: mode,
        config: &cfg,
        pools: &[],
        init: None,
        variant: None,
        rate: None,
    };
    let mut run = RunDir::create(&out, &serde_json::to_value(&resolved).expect("config"))?;
    let (params, log) = train_clean(&dataset, &cfg, Some(&mut run))?;
    let final_path = run.finish(&params)?;
    eprintln!(
        "trained {} epochs on {} sentences; final loss {:.6}; checkpoint {}",
        log.len(),
        dataset.len(),
        log.last().map(|m| m.loss).unwrap_or(f64::NAN),
        final_path.display()
    );
    Ok(())
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default)]
struct TrainRobustArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: TrainCommonArgs,
    /// Simulated pool file(s) written by `simulate` (repeatable).
    #[arg(long = "pool")]
    pools: Vec<PathBuf>,
    /// Checkpoint of the clean-trained model.
    #[arg(long)]
    init: Option<PathBuf>,
}

fn load_pools(paths: &[PathBuf], tokenizer: &Tokenizer) -> CliResult<NoisyPool> {
    let mut pool = NoisyPool::default();
    for p in paths {
        pool.extend(NoisyPool::read_jsonl(p, tokenizer)?);
    }
    Ok(pool)
}

fn train_robust_cmd(args: TrainRobustArgs) -> CliResult {
    let file: TrainRobustArgs = match &args.common.config {
        Some(p) => read_config_file(p)?,
        None => TrainRobustArgs::default(),
    };
    let common = args.common.merged(file.common);
    let pools = if args.pools.is_empty() { file.pools } else { args.pools };
    let init_path = require(merge(args.init, file.init), "init")?;
    if pools.is_empty() {
        return Err(usage("train-robust needs at least one --pool file"));
    }
    let cfg = common.train_config()?;
    let train_path = require(common.train.clone(), "train")?;
    let out = require(common.out.clone(), "out")?;
    let mode = common.tokenizer.unwrap_or(TokenizerMode::ByteFaithful);
    let tokenizer = Tokenizer::new(mode);
    let dataset = load_dataset_auto(&train_path, None, &tokenizer)?;
    dataset.validate()?;
    let pool = load_pools(&pools, &tokenizer)?;
    let init = ClassifierParams::load(&init_path)?;

    let resolved = TrainResolved {
        stage: "train-robust",
        train: &train_path,
        out: &out,
        tokenizer: mode,
        config: &cfg,
        pools: &pools,
        init: Some(&init_path),
        variant: None,
        rate: None,
    };
    let mut run = RunDir::create(&out, &serde_json::to_value(&resolved).expect("config"))?;
    let (params, log) = robust_train(&dataset, &pool, &cfg, &init, Some(&mut run))?;
    let final_path = run.finish(&params)?;
    eprintln!(
        "robust-trained {} epochs over pool of {}; final loss {:.6}; checkpoint {}",
        log.len(),
        pool.len(),
        log.last().map(|m| m.loss).unwrap_or(f64::NAN),
        final_path.display()
    );
    Ok(())
}

#[derive(clap::ValueEnum, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Debug)]
#[serde(rename_all = "kebab-case")]
enum BaselineVariant {
    NaiveMerge,
    Random,
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default)]
struct TrainBaselineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: TrainCommonArgs,
    #[arg(long, value_enum)]
    variant: Option<BaselineVariant>,
    #[arg(long = "pool")]
    pools: Vec<PathBuf>,
    #[arg(long)]
    init: Option<PathBuf>,
    /// Edit rate of the random baseline.
    #[arg(long)]
    rate: Option<f64>,
}

fn train_baseline_cmd(args: TrainBaselineArgs) -> CliResult {
    let file: TrainBaselineArgs = match &args.common.config {
        Some(p) => read_config_file(p)?,
        None => TrainBaselineArgs::default(),
    };
    let common = args.common.merged(file.common);
    let variant = require(merge(args.variant, file.variant), "variant")?;
    let pools = if args.pools.is_empty() { file.pools } else { args.pools };
    let init_path = require(merge(args.init, file.init), "init")?;
    let rate = merge(args.rate, file.rate).unwrap_or(0.1);
    let cfg = common.train_config()?;
    let train_path = require(common.train.clone(), "train")?;
    let out = require(common.out.clone(), "out")?;
    let mode = common.tokenizer.unwrap_or(TokenizerMode::ByteFaithful);
    let tokenizer = Tokenizer::new(mode);
    let dataset = load_dataset_auto(&train_path, None, &tokenizer)?;
    dataset.validate()?;
    let init = ClassifierParams::load(&init_path)?;

    let variant_name = match variant {
        BaselineVariant::NaiveMerge => "naive-merge",
        BaselineVariant::Random => "random",
    };
    let resolved = TrainResolved {
        stage: "train-baseline",
        train: &train_path,
        out: &out,
        tokenizer: mode,
        config: &cfg,
        pools: &pools,
        init: Some(&init_path),
        variant: Some(variant_name),
        rate: Some(rate),
    };
    let mut run = RunDir::create(&out, &serde_json::to_value(&resolved).expect("config"))?;
    let (params, log) = match variant {
        BaselineVariant::NaiveMerge => {
            if pools.is_empty() {
                return Err(usage("naive-merge baseline needs at least one --pool file"));
            }
            let pool = load_pools(&pools, &tokenizer)?;
            naive_merge_train(&dataset, &pool, &cfg, &init, Some(&mut run))?
        }
        BaselineVariant::Random => random_augment_train(&dataset, rate, &cfg, &init, Some(&mut run))?,
    };
    let final_path = run.finish(&params)?;
    eprintln!(
        "{} baseline: {} epochs, final loss {:.6}; checkpoint {}",
        variant_name,
        log.len(),
        log.last().map(|m| m.loss).unwrap_or(f64::NAN),
        final_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate / sweep

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default)]
struct EvaluateArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Output file; metrics go to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<DataFormat>,
    #[arg(long, value_enum)]
    tokenizer: Option<TokenizerMode>,
}

fn evaluate_cmd(args: EvaluateArgs) -> CliResult {
    let file: EvaluateArgs = match &args.config {
        Some(p) => read_config_file(p)?,
        None => EvaluateArgs::default(),
    };
    let model_path = require(merge(args.model, file.model), "model")?;
    let test_path = require(merge(args.test, file.test), "test")?;
    let out = merge(args.out, file.out);
    let mode = merge(args.tokenizer, file.tokenizer).unwrap_or(TokenizerMode::ByteFaithful);
    let tokenizer = Tokenizer::new(mode);
    let model = ClassifierParams::load(&model_path)?;
    let dataset = load_dataset_auto(&test_path, merge(args.format, file.format), &tokenizer)?;
    dataset.validate()?;
    let metrics = evaluate(&model, &dataset)?;
    let body = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    match out {
        Some(path) => {
            fs::write(&path, format!("{body}\n")).map_err(|e| CliError::Data(Error::io(&path, e)))?;
            write_sidecar_config(
                &path,
                &serde_json::json!({
                    "stage": "evaluate",
                    "model": model_path,
                    "test": test_path,
                    "out": path,
                    "tokenizer": mode,
                }),
            )?;
        }
        None => println!("{body}"),
    }
    eprintln!(
        "P {:.4} R {:.4} F1 {:.4} on {} sentences",
        metrics.precision,
        metrics.recall,
        metrics.f1,
        dataset.len()
    );
    Ok(())
}

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default)]
struct SweepArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Comma-separated, strictly increasing rates in [0,1].
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    /// Comma-separated seed family.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    tokenizer: Option<TokenizerMode>,
    #[arg(long)]
    workers: Option<usize>,
}

fn sweep_cmd(args: SweepArgs) -> CliResult {
    let file: SweepArgs = match &args.config {
        Some(p) => read_config_file(p)?,
        None => SweepArgs::default(),
    };
    let model_path = require(merge(args.model, file.model), "model")?;
    let test_path = require(merge(args.test, file.test), "test")?;
    let rates = require(merge(args.rates, file.rates), "rates")?;
    let seeds = require(merge(args.seeds, file.seeds), "seeds")?;
    let out = merge(args.out, file.out);
    let mode = merge(args.tokenizer, file.tokenizer).unwrap_or(TokenizerMode::ByteFaithful);
    install_workers(merge(args.workers, file.workers))?;

    let tokenizer = Tokenizer::new(mode);
    let model = ClassifierParams::load(&model_path)?;
    let dataset = load_dataset_auto(&test_path, None, &tokenizer)?;
    dataset.validate()?;
    let curve =
        noise_sweep(&model, &dataset, &rates, &seeds).map_err(CliError::from)?;
    let mut body = String::new();
    for p in &curve.points {
        body.push_str(&serde_json::to_string(&serde_json::json!({
            "rate": p.rate,
            "precision": p.precision,
            "recall": p.recall,
            "f1": p.f1,
        })).expect("point serializes"));
        body.push('\n');
    }
    match &out {
        Some(path) => {
            fs::write(path, &body).map_err(|e| CliError::Data(Error::io(path, e)))?;
            write_sidecar_config(
                path,
                &serde_json::json!({
                    "stage": "sweep",
                    "model": model_path,
                    "test": test_path,
                    "rates": rates,
                    "seeds": seeds,
                    "out": path,
                    "tokenizer": mode,
                }),
            )?;
        }
        None => print!("{body}"),
    }
    for p in &curve.points {
        eprintln!("rate {:.2}: F1 {:.4}", p.rate, p.f1);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// ablate

/// On-disk ablation config: dataset paths plus the harness grid. Paths are
/// resolved relative to the config file location.
#[derive(Serialize, Deserialize, Clone)]
struct AblateFile {
    train: PathBuf,
    test: PathBuf,
    parallel: PathBuf,
    #[serde(default)]
    tokenizer: Option<TokenizerMode>,
    #[serde(flatten)]
    ablation: AblationConfig,
}

#[derive(Args, Default, Clone)]
struct AblateArgs {
    /// Benchmark config (written by gen-benchmark).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the config's seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override the config's variant list.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
}

fn ablate_cmd(args: AblateArgs) -> CliResult {
    let config_path = require(args.config, "config")?;
    let mut file: AblateFile = read_config_file(&config_path)?;
    if let Some(seeds) = args.seeds {
        file.ablation.seeds = seeds;
    }
    if let Some(variants) = args.variants {
        file.ablation.variants = variants
            .iter()
            .map(|v| v.parse::<Variant>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| usage(e.to_string()))?;
    }
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let tokenizer = tokenizer_of(file.tokenizer);
    let train = load_dataset_auto(&resolve(&file.train), None, &tokenizer)?;
    let test = load_dataset_auto(&resolve(&file.test), None, &tokenizer)?;
    let pairs = load_parallel(&resolve(&file.parallel), &tokenizer)?;

    let report = ablation_report(&train, &test, &pairs, &file.ablation)?;
    let table = report.render_table();
    match &args.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::Data(Error::io(dir, e)))?;
            let rows = dir.join("report.jsonl");
            fs::write(&rows, report.to_jsonl()).map_err(|e| CliError::Data(Error::io(&rows, e)))?;
            let table_path = dir.join("report.txt");
            fs::write(&table_path, &table).map_err(|e| CliError::Data(Error::io(&table_path, e)))?;
            let cfg_path = dir.join("config.json");
            let pretty = serde_json::to_string_pretty(&file).expect("config serializes");
            fs::write(&cfg_path, pretty).map_err(|e| CliError::Data(Error::io(&cfg_path, e)))?;
            eprintln!("wrote {} and {}", rows.display(), table_path.display());
        }
        None => print!("{}", report.to_jsonl()),
    }
    eprint!("{table}");
    Ok(())
}

// ---------------------------------------------------------------------------
// gen-benchmark

#[derive(Args, Serialize, Deserialize, Default, Clone)]
#[serde(default)]
struct GenBenchmarkArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Output directory for train/test/parallel/bench.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    parallel_size: Option<usize>,
    #[arg(long)]
    positive_rate: Option<f64>,
}

fn gen_benchmark_cmd(args: GenBenchmarkArgs) -> CliResult {
    let file: GenBenchmarkArgs = match &args.config {
        Some(p) => read_config_file(p)?,
        None => GenBenchmarkArgs::default(),
    };
    let out = require(merge(args.out, file.out), "out")?;
    let seed = require(merge(args.seed, file.seed), "seed")?;
    let defaults = BenchmarkSpec::default();
    let spec = BenchmarkSpec {
        seed,
        train_size: merge(args.train_size, file.train_size).unwrap_or(defaults.train_size),
        test_size: merge(args.test_size, file.test_size).unwrap_or(defaults.test_size),
        parallel_size: merge(args.parallel_size, file.parallel_size).unwrap_or(defaults.parallel_size),
        positive_rate: merge(args.positive_rate, file.positive_rate).unwrap_or(defaults.positive_rate),
        ..defaults
    };
    fs::create_dir_all(&out).map_err(|e| CliError::Data(Error::io(&out, e)))?;
    let data = benchmark::generate(&spec);
    save_dataset_jsonl(&data.train, &out.join("train.jsonl"))?;
    save_dataset_jsonl(&data.test, &out.join("test.jsonl"))?;
    save_parallel_tsv(&data.parallel, &out.join("parallel.tsv"))?;
    let bench = AblateFile {
        train: PathBuf::from("train.jsonl"),
        test: PathBuf::from("test.jsonl"),
        parallel: PathBuf::from("parallel.tsv"),
        tokenizer: Some(TokenizerMode::ByteFaithful),
        ablation: AblationConfig::default(),
    };
    let bench_path = out.join("bench.json");
    let pretty = serde_json::to_string_pretty(&bench).expect("config serializes");
    fs::write(&bench_path, pretty).map_err(|e| CliError::Data(Error::io(&bench_path, e)))?;
    write_sidecar_config(
        &out.join("benchmark"),
        &serde_json::json!({
            "stage": "gen-benchmark",
            "out": out,
            "spec": spec,
        }),
    )?;
    eprintln!(
        "benchmark written to {}: train {} / test {} / parallel {} (noise rate {:.4})",
        out.display(),
        data.train.len(),
        data.test.len(),
        data.parallel.len(),
        noise_rate(&data.parallel)?
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_flag_is_usage_error() {
        let code = run(["textnoise", "simulate", "--bogus-flag", "x"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let code = run(["textnoise", "frobnicate"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["textnoise", "--help"]), 0);
    }

    #[test]
    fn missing_required_flag_is_usage_error() {
        // No --pairs/--out.
        assert_eq!(run(["textnoise", "build-confusion"]), 1);
    }

    #[test]
    fn missing_input_file_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("cm.json");
        let code = run([
            "textnoise",
            "build-confusion",
            "--pairs",
            "/nonexistent/p.tsv",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 2);
    }

    #[test]
    fn malformed_data_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = dir.path().join("p.tsv");
        fs::write(&pairs, "no tab here\n").unwrap();
        let out = dir.path().join("cm.json");
        let code = run([
            "textnoise",
            "build-confusion",
            "--pairs",
            pairs.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 2);
    }

    #[test]
    fn build_confusion_writes_matrix_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = dir.path().join("p.tsv");
        fs::write(&pairs, "abc\tabd\nxy\txy\n").unwrap();
        let out = dir.path().join("cm.json");
        let code = run([
            "textnoise",
            "build-confusion",
            "--pairs",
            pairs.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--floor",
            "0.1",
        ]);
        assert_eq!(code, 0);
        let matrix = ConfusionMatrix::load(&out).unwrap();
        for &sym in matrix.vocab() {
            let sum: f64 = matrix.row(sym).iter().map(|(_, p)| p).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
        assert!(dir.path().join("cm.json.config.json").is_file());
    }
}
