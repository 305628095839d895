//! C ABI over `wolofspell`.
//!
//! Handles are opaque and owned by the caller; each `*_new`/`*_load`/
//! `*_train` has a matching `*_free`. Every fallible call returns a
//! [`WsStatus`]; on failure [`ws_last_error_message`] describes the error
//! for the calling thread. Strings handed out by the library must be
//! released with [`ws_string_free`]. All text is UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use wolofspell::corpus::{normalize_text, Sentence};
use wolofspell::corrector::{Corrector, CorrectorError, DecoderConfig};
use wolofspell::eval::{sentence_accuracy, EvalError};
use wolofspell::inverse::{InversionConfig, DEFAULT_IDENTITY_PROB};
use wolofspell::lm::{train_lm, LmError, NGramLanguageModel};
use wolofspell::rules::{apply_rules, builtin, parse_ruleset, resolve_ruleset, RewriteRuleSet, RuleError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidArgument = 5,
    Alignment = 6,
    Panic = 7,
}

/// Compiled rewrite rules.
pub struct WsRuleSet(RewriteRuleSet);

/// Character n-gram language model.
pub struct WsLanguageModel(NGramLanguageModel);

/// Rules, their inversion and a language model, ready to correct text.
pub struct WsCorrector(Corrector);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsDecoderConfig {
    pub beam_width: usize,
    pub lm_weight: f64,
    /// 0 keeps every candidate.
    pub max_candidates_per_span: usize,
    /// Channel probability that a span needs no change, in (0, 1).
    pub identity_prob: f64,
}

struct Failure {
    status: WsStatus,
    message: String,
}

impl Failure {
    fn new(status: WsStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<RuleError> for Failure {
    fn from(e: RuleError) -> Self {
        let status = match e {
            RuleError::Io { .. } => WsStatus::Io,
            _ => WsStatus::Parse,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<LmError> for Failure {
    fn from(e: LmError) -> Self {
        let status = match e {
            LmError::Io { .. } => WsStatus::Io,
            LmError::Format(_) => WsStatus::Parse,
            _ => WsStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<CorrectorError> for Failure {
    fn from(e: CorrectorError) -> Self {
        let status = match e {
            CorrectorError::Alignment { .. } => WsStatus::Alignment,
            CorrectorError::Corpus(_) => WsStatus::Io,
            _ => WsStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let status = match e {
            EvalError::Alignment { .. } => WsStatus::Alignment,
            _ => WsStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', "\\0")).expect("NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WsStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WsStatus::Ok,
        Ok(Err(fail)) => {
            set_error(&fail.message);
            fail.status
        }
        Err(_) => {
            set_error("internal error: the library panicked");
            WsStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(WsStatus::NullArgument, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(WsStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn texts(p: *const *const c_char, n: usize, what: &str) -> Result<Vec<Sentence>, Failure> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(Failure::new(WsStatus::NullArgument, format!("{what} is NULL")));
    }
    (0..n)
        .map(|i| text(*p.add(i), &format!("{what}[{i}]")).map(|t| Sentence::new(i, t)))
        .collect()
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(WsStatus::NullArgument, format!("{what} is NULL")))
}

fn out_ptr<T>(out: *mut T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(WsStatus::NullArgument, format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

fn owned_string(s: &str) -> *mut c_char {
    // Sentences never contain NUL: they come from valid C strings.
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ws_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ws_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ws_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_ruleset_builtin(out: *mut *mut WsRuleSet) -> WsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(WsRuleSet(builtin().clone())));
        Ok(())
    })
}

/// Loads a built-in rule set by name, or a rule file by path.
///
/// # Safety
/// `name_or_path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_ruleset_load(name_or_path: *const c_char, out: *mut *mut WsRuleSet) -> WsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let rules = resolve_ruleset(text(name_or_path, "name_or_path")?)?;
        *out = Box::into_raw(Box::new(WsRuleSet(rules)));
        Ok(())
    })
}

/// Compiles rules from the text of a rule file.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_ruleset_parse(source: *const c_char, out: *mut *mut WsRuleSet) -> WsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let rules = parse_ruleset(text(source, "source")?)?;
        *out = Box::into_raw(Box::new(WsRuleSet(rules)));
        Ok(())
    })
}

/// Number of rules in the set.
///
/// # Safety
/// `rules` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ws_ruleset_len(rules: *const WsRuleSet) -> usize {
    rules.as_ref().map_or(0, |r| r.0.len())
}

/// Normalizes `sentence` and rewrites it into conventional spelling.
///
/// # Safety
/// `rules` must be a live handle, `sentence` a NUL-terminated string and
/// `out` a valid pointer; free `*out` with [`ws_string_free`].
#[no_mangle]
pub unsafe extern "C" fn ws_ruleset_apply(
    rules: *const WsRuleSet,
    sentence: *const c_char,
    out: *mut *mut c_char,
) -> WsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let rules = handle(rules, "rules")?;
        let noisy = apply_rules(&normalize_text(text(sentence, "sentence")?), &rules.0);
        *out = owned_string(noisy.as_str());
        Ok(())
    })
}

/// # Safety
/// `rules` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ws_ruleset_free(rules: *mut WsRuleSet) {
    if !rules.is_null() {
        drop(Box::from_raw(rules));
    }
}

/// Trains an additive-smoothing character model of the given order.
///
/// # Safety
/// `sentences` must point to `n` NUL-terminated strings (it may be NULL
/// when `n` is 0); `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_lm_train(
    sentences: *const *const c_char,
    n: usize,
    order: usize,
    k: f64,
    out: *mut *mut WsLanguageModel,
) -> WsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let sents = texts(sentences, n, "sentences")?;
        let lm = train_lm(&sents, order, k)?;
        *out = Box::into_raw(Box::new(WsLanguageModel(lm)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_lm_load(path: *const c_char, out: *mut *mut WsLanguageModel) -> WsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let lm = NGramLanguageModel::load(text(path, "path")?)?;
        *out = Box::into_raw(Box::new(WsLanguageModel(lm)));
        Ok(())
    })
}

/// # Safety
/// `lm` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ws_lm_save(lm: *const WsLanguageModel, path: *const c_char) -> WsStatus {
    guard(|| {
        handle(lm, "lm")?.0.save(text(path, "path")?)?;
        Ok(())
    })
}

/// Natural-log probability of the normalized sentence, end symbol included.
///
/// # Safety
/// `lm` must be a live handle, `sentence` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_lm_score(lm: *const WsLanguageModel, sentence: *const c_char, out: *mut f64) -> WsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let lm = handle(lm, "lm")?;
        *out = lm.0.score(normalize_text(text(sentence, "sentence")?).as_str());
        Ok(())
    })
}

/// # Safety
/// `lm` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ws_lm_free(lm: *mut WsLanguageModel) {
    if !lm.is_null() {
        drop(Box::from_raw(lm));
    }
}

/// The library's default decoder settings.
#[no_mangle]
pub extern "C" fn ws_decoder_config_default() -> WsDecoderConfig {
    let d = DecoderConfig::default();
    WsDecoderConfig {
        beam_width: d.beam_width,
        lm_weight: d.lm_weight,
        max_candidates_per_span: d.max_candidates_per_span,
        identity_prob: DEFAULT_IDENTITY_PROB,
    }
}

/// Builds a corrector from copies of `rules` and `lm`; both handles stay
/// owned by the caller. `config` may be NULL for the defaults.
///
/// # Safety
/// `rules` and `lm` must be live handles, `config` NULL or valid, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_corrector_new(
    rules: *const WsRuleSet,
    lm: *const WsLanguageModel,
    config: *const WsDecoderConfig,
    out: *mut *mut WsCorrector,
) -> WsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let rules = handle(rules, "rules")?;
        let lm = handle(lm, "lm")?;
        let cfg = config.as_ref().copied().unwrap_or_else(|| ws_decoder_config_default());
        if !(cfg.identity_prob > 0.0 && cfg.identity_prob < 1.0) {
            return Err(Failure::new(
                WsStatus::InvalidArgument,
                format!("identity_prob must lie in (0, 1), got {}", cfg.identity_prob),
            ));
        }
        let decoder = DecoderConfig {
            beam_width: cfg.beam_width,
            lm_weight: cfg.lm_weight,
            max_candidates_per_span: cfg.max_candidates_per_span,
        };
        let inversion = InversionConfig {
            identity_prob: cfg.identity_prob,
            ..InversionConfig::default()
        };
        let c = Corrector::with_inversion(rules.0.clone(), lm.0.clone(), decoder, &inversion)?;
        *out = Box::into_raw(Box::new(WsCorrector(c)));
        Ok(())
    })
}

/// Corrects one conventional-spelling sentence.
///
/// # Safety
/// `corrector` must be a live handle, `sentence` a NUL-terminated string
/// and `out` a valid pointer; free `*out` with [`ws_string_free`].
#[no_mangle]
pub unsafe extern "C" fn ws_corrector_correct(
    corrector: *const WsCorrector,
    sentence: *const c_char,
    out: *mut *mut c_char,
) -> WsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let c = handle(corrector, "corrector")?;
        let fixed = c.0.correct(&normalize_text(text(sentence, "sentence")?));
        *out = owned_string(fixed.as_str());
        Ok(())
    })
}

/// # Safety
/// `corrector` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ws_corrector_free(corrector: *mut WsCorrector) {
    if !corrector.is_null() {
        drop(Box::from_raw(corrector));
    }
}

/// Sentence-level accuracy in percent after normalization.
///
/// # Safety
/// `predictions` and `references` must point to `n_predictions` and
/// `n_references` NUL-terminated strings; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ws_sentence_accuracy(
    predictions: *const *const c_char,
    n_predictions: usize,
    references: *const *const c_char,
    n_references: usize,
    out: *mut f64,
) -> WsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let p = texts(predictions, n_predictions, "predictions")?;
        let r = texts(references, n_references, "references")?;
        *out = sentence_accuracy(&p, &r)?;
        Ok(())
    })
}
