//! C ABI for the textnoise toolkit: opaque handles over the confusion
//! matrix, the classifier, and the noise channels, plus status codes and a
//! thread-local last-error message.
//!
//! Conventions:
//! - constructors return a heap pointer, or null with `tn_last_error` set;
//! - operations on existing handles return `TnStatus` and write through
//!   out-pointers;
//! - strings returned by the library must be released with
//!   `tn_string_free`, handles with their matching `*_free`.
//!
//! The generated header lives at `include/textnoise.h` (see `build.rs`).

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::Path;
use std::sync::Arc;

use libc::{c_char, c_int};

use textnoise::channels::{
    fit_context_channel, AttackChannel, AttackMode, FileChannel, NoiseChannel, RandomChannel,
    RuleChannel,
};
use textnoise::classifier::ClassifierParams;
use textnoise::corpus::{load_parallel, Token, Tokenizer};
use textnoise::error::Error;
use textnoise::ConfusionMatrix;

/// Status codes returned by fallible operations.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TnStatus {
    TnOk = 0,
    /// A required pointer argument was null.
    TnNullArgument = 1,
    /// A string argument was not valid UTF-8.
    TnInvalidUtf8 = 2,
    /// An argument was out of range or otherwise unusable.
    TnInvalidArgument = 3,
    /// The underlying file could not be read or written.
    TnIoError = 4,
    /// The input parsed but its content was invalid.
    TnDataError = 5,
}

/// Opaque handle over a token-level confusion matrix.
pub struct TnMatrix {
    inner: Arc<ConfusionMatrix>,
}

/// Opaque handle over classifier parameters.
pub struct TnClassifier {
    inner: Arc<ClassifierParams>,
}

/// Opaque handle over a configured noise channel.
pub struct TnChannel {
    inner: Box<dyn NoiseChannel>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error message contained NUL").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TnStatus {
    match e {
        Error::Io { .. } => TnStatus::TnIoError,
        Error::Config(_) => TnStatus::TnInvalidArgument,
        _ => TnStatus::TnDataError,
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for the call.
unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, TnStatus> {
    if ptr.is_null() {
        set_error(format!("{what} must not be null"));
        return Err(TnStatus::TnNullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        TnStatus::TnInvalidUtf8
    })
}

fn fail_ptr<T>(e: Error) -> *mut T {
    set_error(e.to_string());
    std::ptr::null_mut()
}

fn tokenizer() -> Tokenizer {
    Tokenizer::default()
}

/// Version of the library as a static string; never freed.
#[no_mangle]
pub extern "C" fn tn_version() -> *const c_char {
    static VERSION: &[u8] = b"0.1.0\0";
    VERSION.as_ptr().cast()
}

/// Message of the last error on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tn_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(c) => c.as_ptr(),
        None => std::ptr::null(),
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer previously returned by a `tn_*` function
/// that documents `tn_string_free`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Confusion matrix

/// Estimates a confusion matrix from a `clean<TAB>noisy` tsv corpus.
/// Returns null on failure (see `tn_last_error`).
///
/// # Safety
/// `pairs_path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tn_matrix_fit(pairs_path: *const c_char, floor: f64) -> *mut TnMatrix {
    let Ok(path) = read_str(pairs_path, "pairs_path") else {
        return std::ptr::null_mut();
    };
    match load_parallel(Path::new(path), &tokenizer())
        .and_then(|pairs| textnoise::build_confusion(&pairs, floor))
    {
        Ok(m) => Box::into_raw(Box::new(TnMatrix { inner: Arc::new(m) })),
        Err(e) => fail_ptr(e),
    }
}

/// Loads a serialized confusion matrix. Returns null on failure.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tn_matrix_load(path: *const c_char) -> *mut TnMatrix {
    let Ok(path) = read_str(path, "path") else {
        return std::ptr::null_mut();
    };
    match ConfusionMatrix::load(Path::new(path)) {
        Ok(m) => Box::into_raw(Box::new(TnMatrix { inner: Arc::new(m) })),
        Err(e) => fail_ptr(e),
    }
}

/// Writes the matrix to `path` as deterministic JSON.
///
/// # Safety
/// `matrix` must be a live handle; `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tn_matrix_save(matrix: *const TnMatrix, path: *const c_char) -> TnStatus {
    let Some(matrix) = matrix.as_ref() else {
        set_error("matrix must not be null");
        return TnStatus::TnNullArgument;
    };
    let path = match read_str(path, "path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    match matrix.inner.save(Path::new(path)) {
        Ok(()) => TnStatus::TnOk,
        Err(e) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
    }
}

/// Number of symbols in the matrix vocabulary, epsilon included.
/// Returns 0 for a null handle.
///
/// # Safety
/// `matrix` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tn_matrix_vocab_size(matrix: *const TnMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.inner.vocab().len())
}

/// # Safety
/// `matrix` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tn_matrix_free(matrix: *mut TnMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

// ---------------------------------------------------------------------------
// Classifier

/// Loads a classifier checkpoint. Returns null on failure.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tn_classifier_load(path: *const c_char) -> *mut TnClassifier {
    let Ok(path) = read_str(path, "path") else {
        return std::ptr::null_mut();
    };
    match ClassifierParams::load(Path::new(path)) {
        Ok(p) => Box::into_raw(Box::new(TnClassifier { inner: Arc::new(p) })),
        Err(e) => fail_ptr(e),
    }
}

/// Probability that `text` is a positive, written to `out_prob`.
///
/// # Safety
/// `classifier` must be a live handle, `text` a valid NUL-terminated
/// string, `out_prob` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tn_classifier_prob(
    classifier: *const TnClassifier,
    text: *const c_char,
    out_prob: *mut f64,
) -> TnStatus {
    let Some(classifier) = classifier.as_ref() else {
        set_error("classifier must not be null");
        return TnStatus::TnNullArgument;
    };
    if out_prob.is_null() {
        set_error("out_prob must not be null");
        return TnStatus::TnNullArgument;
    }
    let text = match read_str(text, "text") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let sentence = tokenizer().sentence(text, None, 0);
    *out_prob = textnoise::forward(&classifier.inner, &sentence, None).prob;
    TnStatus::TnOk
}

/// Hard 0/1 decision at `threshold`, written to `out_label`.
///
/// # Safety
/// Same contract as [`tn_classifier_prob`].
#[no_mangle]
pub unsafe extern "C" fn tn_classifier_predict(
    classifier: *const TnClassifier,
    text: *const c_char,
    threshold: f64,
    out_label: *mut c_int,
) -> TnStatus {
    let Some(classifier) = classifier.as_ref() else {
        set_error("classifier must not be null");
        return TnStatus::TnNullArgument;
    };
    if out_label.is_null() {
        set_error("out_label must not be null");
        return TnStatus::TnNullArgument;
    }
    let text = match read_str(text, "text") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let sentence = tokenizer().sentence(text, None, 0);
    *out_label = c_int::from(classifier.inner.predict(&sentence, threshold));
    TnStatus::TnOk
}

/// # Safety
/// `classifier` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tn_classifier_free(classifier: *mut TnClassifier) {
    if !classifier.is_null() {
        drop(Box::from_raw(classifier));
    }
}

// ---------------------------------------------------------------------------
// Channels

/// Rule channel over a fitted matrix.
///
/// # Safety
/// `matrix` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tn_channel_rule(matrix: *const TnMatrix, seed: u64) -> *mut TnChannel {
    let Some(matrix) = matrix.as_ref() else {
        set_error("matrix must not be null");
        return std::ptr::null_mut();
    };
    let channel = RuleChannel::new(matrix.inner.clone(), seed);
    Box::into_raw(Box::new(TnChannel { inner: Box::new(channel) }))
}

/// Uniform random-edit channel; `vocab` is the replacement alphabet as a
/// UTF-8 string of scalars.
///
/// # Safety
/// `vocab` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tn_channel_random(vocab: *const c_char, rate: f64, seed: u64) -> *mut TnChannel {
    let Ok(vocab) = read_str(vocab, "vocab") else {
        return std::ptr::null_mut();
    };
    let tokens: Vec<Token> = vocab.chars().map(Token).collect();
    match RandomChannel::new(rate, tokens, seed) {
        Ok(channel) => Box::into_raw(Box::new(TnChannel { inner: Box::new(channel) })),
        Err(e) => fail_ptr(e),
    }
}

/// Context-conditioned channel fitted on a `clean<TAB>noisy` tsv corpus.
///
/// # Safety
/// `pairs_path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tn_channel_context(
    pairs_path: *const c_char,
    lambda: f64,
    floor: f64,
    seed: u64,
) -> *mut TnChannel {
    let Ok(path) = read_str(pairs_path, "pairs_path") else {
        return std::ptr::null_mut();
    };
    match load_parallel(Path::new(path), &tokenizer())
        .and_then(|pairs| fit_context_channel(&pairs, lambda, floor, seed))
    {
        Ok(channel) => Box::into_raw(Box::new(TnChannel { inner: Box::new(channel) })),
        Err(e) => fail_ptr(e),
    }
}

/// Greedy attack channel guided by a trained classifier. `max_edits` of 0
/// selects the default budget (one edit per ten tokens, at least one);
/// `sample_mode` of 0 substitutes the argmax confusable, nonzero samples
/// proportionally.
///
/// # Safety
/// `matrix` and `scorer` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn tn_channel_attack(
    matrix: *const TnMatrix,
    scorer: *const TnClassifier,
    max_edits: usize,
    sample_mode: c_int,
    seed: u64,
) -> *mut TnChannel {
    let Some(matrix) = matrix.as_ref() else {
        set_error("matrix must not be null");
        return std::ptr::null_mut();
    };
    let Some(scorer) = scorer.as_ref() else {
        set_error("scorer must not be null");
        return std::ptr::null_mut();
    };
    let channel = AttackChannel::new(
        matrix.inner.clone(),
        scorer.inner.clone(),
        if max_edits == 0 { None } else { Some(max_edits) },
        if sample_mode == 0 { AttackMode::Argmax } else { AttackMode::Sample },
        seed,
    );
    Box::into_raw(Box::new(TnChannel { inner: Box::new(channel) }))
}

/// Escape hatch: a pre-generated `clean<TAB>noisy` tsv used as a channel.
///
/// # Safety
/// `tsv_path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tn_channel_file(tsv_path: *const c_char) -> *mut TnChannel {
    let Ok(path) = read_str(tsv_path, "tsv_path") else {
        return std::ptr::null_mut();
    };
    match FileChannel::from_tsv(Path::new(path), tokenizer()) {
        Ok(channel) => Box::into_raw(Box::new(TnChannel { inner: Box::new(channel) })),
        Err(e) => fail_ptr(e),
    }
}

/// Static name of the channel kind ("rule", "attack", ...); never freed.
///
/// # Safety
/// `channel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tn_channel_tag(channel: *const TnChannel) -> *const c_char {
    match channel.as_ref().map(|c| c.inner.tag()) {
        Some("rule") => b"rule\0".as_ptr().cast(),
        Some("attack") => b"attack\0".as_ptr().cast(),
        Some("context") => b"context\0".as_ptr().cast(),
        Some("random") => b"random\0".as_ptr().cast(),
        Some("file") => b"file\0".as_ptr().cast(),
        _ => std::ptr::null(),
    }
}

/// Injects noise into `text`. The `(sentence_id, rep)` pair selects the
/// deterministic random stream, so identical inputs give identical output.
/// Returns a new string to release with `tn_string_free`, or null on
/// failure.
///
/// # Safety
/// `channel` must be a live handle and `text` a valid NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn tn_channel_inject(
    channel: *const TnChannel,
    text: *const c_char,
    sentence_id: u64,
    rep: u64,
) -> *mut c_char {
    let Some(channel) = channel.as_ref() else {
        set_error("channel must not be null");
        return std::ptr::null_mut();
    };
    let Ok(text) = read_str(text, "text") else {
        return std::ptr::null_mut();
    };
    let sentence = tokenizer().sentence(text, None, sentence_id);
    match channel.inner.inject_rep(&sentence, rep) {
        Ok(noisy) => match CString::new(noisy.text()) {
            Ok(c) => c.into_raw(),
            Err(_) => {
                set_error("noisy text contained an interior NUL");
                std::ptr::null_mut()
            }
        },
        Err(e) => fail_ptr(e),
    }
}

/// # Safety
/// `channel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tn_channel_free(channel: *mut TnChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}
