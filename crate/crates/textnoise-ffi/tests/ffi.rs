//! Exercises the C ABI end to end through the exported symbols: handle
//! lifecycles, error reporting, and injection determinism.

use std::ffi::{CStr, CString};
use std::os::raw::c_int;
use std::process::Command;

use textnoise_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn inject_to_string(ch: *const TnChannel, text: &str, id: u64, rep: u64) -> Option<String> {
    let text = c(text);
    let raw = tn_channel_inject(ch, text.as_ptr(), id, rep);
    if raw.is_null() {
        return None;
    }
    let out = CStr::from_ptr(raw).to_str().unwrap().to_string();
    tn_string_free(raw);
    Some(out)
}

fn last_error_string() -> Option<String> {
    let p = tn_last_error();
    if p.is_null() {
        return None;
    }
    Some(unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string())
}

#[test]
fn version_is_a_static_string() {
    let v = unsafe { CStr::from_ptr(tn_version()) };
    assert_eq!(v.to_str().unwrap(), "0.1.0");
}

#[test]
fn matrix_fit_save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("p.tsv");
    std::fs::write(&pairs, "abc\tabd\nbc\tbc\n").unwrap();
    let pairs_c = c(pairs.to_str().unwrap());

    unsafe {
        let matrix = tn_matrix_fit(pairs_c.as_ptr(), 0.0);
        assert!(!matrix.is_null(), "{:?}", last_error_string());
        // a, b, c, d plus epsilon.
        assert_eq!(tn_matrix_vocab_size(matrix), 5);

        let out = dir.path().join("cm.json");
        let out_c = c(out.to_str().unwrap());
        assert_eq!(tn_matrix_save(matrix, out_c.as_ptr()), TnStatus::TnOk);

        let reloaded = tn_matrix_load(out_c.as_ptr());
        assert!(!reloaded.is_null());
        assert_eq!(tn_matrix_vocab_size(reloaded), 5);

        tn_matrix_free(matrix);
        tn_matrix_free(reloaded);
    }
}

#[test]
fn missing_file_returns_null_and_sets_error() {
    let path = c("/nonexistent/pairs.tsv");
    unsafe {
        let matrix = tn_matrix_fit(path.as_ptr(), 0.0);
        assert!(matrix.is_null());
    }
    let msg = last_error_string().expect("error message set");
    assert!(msg.contains("pairs.tsv"), "{msg}");
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        assert!(tn_matrix_fit(std::ptr::null(), 0.0).is_null());
        assert_eq!(tn_matrix_save(std::ptr::null(), std::ptr::null()), TnStatus::TnNullArgument);
        assert_eq!(tn_matrix_vocab_size(std::ptr::null()), 0);
        let mut prob = 0.0;
        assert_eq!(
            tn_classifier_prob(std::ptr::null(), std::ptr::null(), &mut prob),
            TnStatus::TnNullArgument
        );
        assert!(tn_channel_inject(std::ptr::null(), std::ptr::null(), 0, 0).is_null());
        // Frees tolerate null.
        tn_matrix_free(std::ptr::null_mut());
        tn_classifier_free(std::ptr::null_mut());
        tn_channel_free(std::ptr::null_mut());
        tn_string_free(std::ptr::null_mut());
    }
}

#[test]
fn invalid_utf8_is_reported() {
    let bad = [0xffu8, 0xfe, 0x00];
    unsafe {
        let matrix = tn_matrix_fit(bad.as_ptr().cast(), 0.0);
        assert!(matrix.is_null());
    }
    let msg = last_error_string().expect("error set");
    assert!(msg.contains("UTF-8"), "{msg}");
}

#[test]
fn rule_channel_injection_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("p.tsv");
    // b maps to x half the time.
    let mut body = String::new();
    for _ in 0..50 {
        body.push_str("ab\tax\nab\tab\n");
    }
    std::fs::write(&pairs, body).unwrap();
    let pairs_c = c(pairs.to_str().unwrap());

    unsafe {
        let matrix = tn_matrix_fit(pairs_c.as_ptr(), 0.0);
        assert!(!matrix.is_null());
        let channel = tn_channel_rule(matrix, 42);
        assert!(!channel.is_null());
        assert_eq!(CStr::from_ptr(tn_channel_tag(channel)).to_str().unwrap(), "rule");

        let a = inject_to_string(channel, "ababab", 7, 0).unwrap();
        let b = inject_to_string(channel, "ababab", 7, 0).unwrap();
        assert_eq!(a, b, "same (seed, id, rep) stream");
        let reps: std::collections::HashSet<String> =
            (0..16).map(|r| inject_to_string(channel, "ababab", 7, r).unwrap()).collect();
        assert!(reps.len() > 1, "distinct reps explore the row");

        tn_channel_free(channel);
        tn_matrix_free(matrix);
    }
}

#[test]
fn random_channel_rejects_bad_rate() {
    let vocab = c("ab");
    unsafe {
        assert!(tn_channel_random(vocab.as_ptr(), 1.5, 0).is_null());
        let ok = tn_channel_random(vocab.as_ptr(), 0.2, 0);
        assert!(!ok.is_null());
        tn_channel_free(ok);
    }
}

#[test]
fn context_and_file_channels_work_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("p.tsv");
    std::fs::write(&pairs, "abc\tabd\n").unwrap();
    let pairs_c = c(pairs.to_str().unwrap());
    unsafe {
        let context = tn_channel_context(pairs_c.as_ptr(), 1.0, 0.0, 3);
        assert!(!context.is_null(), "{:?}", last_error_string());
        assert_eq!(inject_to_string(context, "abc", 0, 0).unwrap(), "abd");
        tn_channel_free(context);

        let file = tn_channel_file(pairs_c.as_ptr());
        assert!(!file.is_null());
        assert_eq!(inject_to_string(file, "abc", 0, 0).unwrap(), "abd");
        assert!(inject_to_string(file, "zzz", 0, 0).is_none(), "unknown clean text fails");
        tn_channel_free(file);
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/textnoise.h");
    let status = Command::new("cc")
        .args(["-x", "c", "-std=c99", "-fsyntax-only", header])
        .status()
        .expect("cc is available in this toolchain image");
    assert!(status.success(), "generated header does not compile as C99");
}

#[test]
fn classifier_prob_and_predict_via_abi() {
    // Train nothing; a fresh init predicts 0.5 everywhere, which is enough
    // to check the plumbing and the boundary rule.
    use textnoise::classifier::{ClassifierParams, Dims};
    use textnoise::corpus::Token;
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("model.json");
    let vocab: Vec<Token> = "ab".chars().map(Token).collect();
    ClassifierParams::init(&vocab, Dims { embed: 4, hidden: 4 }, 0).save(&ckpt).unwrap();

    let ckpt_c = c(ckpt.to_str().unwrap());
    let text = c("abba");
    unsafe {
        let model = tn_classifier_load(ckpt_c.as_ptr());
        assert!(!model.is_null());
        let mut prob = -1.0;
        assert_eq!(tn_classifier_prob(model, text.as_ptr(), &mut prob), TnStatus::TnOk);
        assert_eq!(prob, 0.5, "zero output layer gives 0.5 exactly");
        let mut label: c_int = -1;
        assert_eq!(tn_classifier_predict(model, text.as_ptr(), 0.5, &mut label), TnStatus::TnOk);
        assert_eq!(label, 1, "p >= threshold predicts 1");
        tn_classifier_free(model);
    }
}
