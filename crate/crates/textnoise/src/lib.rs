//! textnoise: OCR-style noise simulation and noise-robust training for
//! small text classifiers.
//!
//! The crate covers the full loop:
//! - estimate a token-level confusion matrix (with an epsilon symbol for
//!   insertions/deletions) from parallel clean/noisy text,
//! - inject noise through rule-based, attack-based, context-conditioned,
//!   or uniform random channels,
//! - train a small differentiable classifier to be noise-invariant with a
//!   stability loss and per-epoch hard-example mining,
//! - evaluate with precision/recall/F1, noise-level sweeps, and an
//!   ablation harness over the trainer variants.
//!
//! Everything stochastic is keyed by explicit seeds; identical inputs and
//! seeds give byte-identical artifacts.

pub mod align;
pub mod benchmark;
pub mod channels;
pub mod classifier;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod rng;
pub mod trainer;

pub use align::{build_confusion, levenshtein_align, noise_rate, AlignmentPath, ConfusionMatrix, EditOp, Sym};
pub use channels::{
    fit_context_channel, AttackChannel, AttackMode, ContextChannel, FileChannel, NoiseChannel,
    RandomChannel, RuleChannel, SimRecord,
};
pub use classifier::{
    cosine_distance, forward, loss_and_grad, sgd_step, BatchSample, ClassifierParams, Dims,
    ForwardResult, Gradients, LossBreakdown, StabilityMode,
};
pub use corpus::{
    detokenize, load_dataset, load_parallel, DataFormat, Dataset, ParallelPair, Sentence, Token,
    Tokenizer, TokenizerMode,
};
pub use error::{Error, Result};
pub use eval::{
    ablation_report, evaluate, metrics_from_counts, noise_sweep, noisy_testset, spearman,
    AblationConfig, AblationReport, Metrics, SweepCurve, Variant,
};
pub use trainer::{
    build_pool, mine_hard, naive_merge_train, random_augment_train, robust_train, select_hard,
    train_clean, EpochMetrics, EpochSink, HardSet, NoisyPool, PoolEntry, RunDir, TrainConfig,
};
