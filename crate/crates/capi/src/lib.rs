//! C ABI for the reviewkit corpus-analytics library.
//!
//! The surface follows the usual C-binding conventions: opaque handles
//! created and destroyed by paired functions, integer status codes, a
//! thread-local last-error message, and caller-provided buffers for
//! strings. The matching header is generated into `include/reviewkit.h`
//! at build time.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::PathBuf;

use libc::{c_char, c_double, c_int, size_t};

use reviewkit::corpus::{self, Corpus, InputFormat};
use reviewkit::lda::{self, TopicModel};
use reviewkit::sentiment::{
    label_from_compound, score_valence_rule, LabelThresholds, SentimentLabel, ValenceLexicon,
    ValenceRuleOptions,
};
use reviewkit::textprep::{self, CategoryLexicon, Lemmatizer, StopwordList, TokenDoc, WordCategory};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RkStatus {
    RkOk = 0,
    RkErrNullPointer = 1,
    RkErrUtf8 = 2,
    RkErrIo = 3,
    RkErrInvalid = 4,
    RkErrBufferTooSmall = 5,
}

/// Vocabulary projection selector for model training.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RkVocabulary {
    RkVocabQualitative = 0,
    RkVocabContent = 1,
}

/// Opaque review collection handle.
pub struct RkCorpus {
    inner: Corpus,
}

/// Opaque topic model handle; keeps its training documents so coherence
/// can be evaluated against them.
pub struct RkModel {
    model: TopicModel,
    docs: Vec<TokenDoc>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl AsRef<str>) {
    let sanitized = message.as_ref().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: RkStatus, message: impl AsRef<str>) -> RkStatus {
    set_error(message);
    status
}

fn fail_with(err: reviewkit::Error) -> RkStatus {
    let status = match &err {
        reviewkit::Error::Io { .. } => RkStatus::RkErrIo,
        _ => RkStatus::RkErrInvalid,
    };
    fail(status, err.to_string())
}

/// Last error message for this thread; valid until the next failing call.
#[no_mangle]
pub extern "C" fn rk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rk_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, RkStatus> {
    if ptr.is_null() {
        return Err(fail(RkStatus::RkErrNullPointer, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(RkStatus::RkErrUtf8, "argument is not valid UTF-8"))
}

fn write_buffer(value: &str, buf: *mut c_char, buf_len: size_t) -> RkStatus {
    if buf.is_null() {
        return fail(RkStatus::RkErrNullPointer, "null output buffer");
    }
    let bytes = value.as_bytes();
    if buf_len < bytes.len() + 1 {
        return fail(
            RkStatus::RkErrBufferTooSmall,
            format!("need {} bytes, got {}", bytes.len() + 1, buf_len),
        );
    }
    unsafe {
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), bytes.len());
        *buf.add(bytes.len()) = 0;
    }
    RkStatus::RkOk
}

// ------------------------------------------------------------------ corpus

/// Load a corpus from a JSONL file (course records allowed inline).
/// On success `*out` owns the handle; free with `rk_corpus_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rk_corpus_load(path: *const c_char, out: *mut *mut RkCorpus) -> RkStatus {
    if out.is_null() {
        return fail(RkStatus::RkErrNullPointer, "null output handle");
    }
    let path = match cstr_arg(path) {
        Ok(p) => PathBuf::from(p),
        Err(status) => return status,
    };
    match corpus::load_corpus(&path, InputFormat::Jsonl) {
        Ok((inner, _)) => {
            *out = Box::into_raw(Box::new(RkCorpus { inner }));
            RkStatus::RkOk
        }
        Err(e) => fail_with(e),
    }
}

/// # Safety
/// `handle` must come from a corpus-producing call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rk_corpus_free(handle: *mut RkCorpus) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn rk_corpus_review_count(handle: *const RkCorpus) -> size_t {
    handle.as_ref().map_or(0, |c| c.inner.review_count())
}

/// # Safety
/// `handle` must be a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn rk_corpus_course_count(handle: *const RkCorpus) -> size_t {
    handle.as_ref().map_or(0, |c| c.inner.course_count())
}

/// Keep only reviews in `language` (BCP-47-style code).
///
/// # Safety
/// `handle` must be live; `language` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rk_corpus_filter_language(
    handle: *const RkCorpus,
    language: *const c_char,
    out: *mut *mut RkCorpus,
) -> RkStatus {
    let Some(corpus) = handle.as_ref() else {
        return fail(RkStatus::RkErrNullPointer, "null corpus handle");
    };
    if out.is_null() {
        return fail(RkStatus::RkErrNullPointer, "null output handle");
    }
    let code = match cstr_arg(language) {
        Ok(c) => c,
        Err(status) => return status,
    };
    let filtered = corpus::filter_language(&corpus.inner, code);
    *out = Box::into_raw(Box::new(RkCorpus { inner: filtered }));
    RkStatus::RkOk
}

/// Drop courses with fewer than `min_reviews` reviews.
///
/// # Safety
/// `handle` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rk_corpus_filter_min_reviews(
    handle: *const RkCorpus,
    min_reviews: size_t,
    out: *mut *mut RkCorpus,
) -> RkStatus {
    let Some(corpus) = handle.as_ref() else {
        return fail(RkStatus::RkErrNullPointer, "null corpus handle");
    };
    if out.is_null() {
        return fail(RkStatus::RkErrNullPointer, "null output handle");
    }
    match corpus::filter_min_reviews(&corpus.inner, min_reviews) {
        Ok((filtered, _)) => {
            *out = Box::into_raw(Box::new(RkCorpus { inner: filtered }));
            RkStatus::RkOk
        }
        Err(e) => fail_with(e),
    }
}

// ---------------------------------------------------------------- language

/// Detect the language of `text` with the bundled character n-gram
/// profiles. Writes the code into `code_buf` and the confidence into
/// `confidence`.
///
/// # Safety
/// `text` must be NUL-terminated; `code_buf` must hold `code_buf_len`
/// writable bytes; `confidence` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rk_detect_language(
    text: *const c_char,
    code_buf: *mut c_char,
    code_buf_len: size_t,
    confidence: *mut c_double,
) -> RkStatus {
    let text = match cstr_arg(text) {
        Ok(t) => t,
        Err(status) => return status,
    };
    if confidence.is_null() {
        return fail(RkStatus::RkErrNullPointer, "null confidence pointer");
    }
    match corpus::detect_language(text) {
        Ok((code, conf)) => {
            let status = write_buffer(&code, code_buf, code_buf_len);
            if status == RkStatus::RkOk {
                *confidence = conf;
            }
            status
        }
        Err(e) => fail_with(e),
    }
}

// --------------------------------------------------------------- sentiment

/// Valence-rule compound of `text` in [-1, 1], computed on cleaned,
/// case-folded tokens with the bundled lexicon.
///
/// # Safety
/// `text` must be NUL-terminated and `compound` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rk_sentiment_compound(
    text: *const c_char,
    compound: *mut c_double,
) -> RkStatus {
    let text = match cstr_arg(text) {
        Ok(t) => t,
        Err(status) => return status,
    };
    if compound.is_null() {
        return fail(RkStatus::RkErrNullPointer, "null compound pointer");
    }
    let tokens = textprep::tokenize(&textprep::clean_text(text));
    *compound = score_valence_rule(
        &tokens,
        ValenceLexicon::bundled(),
        ValenceRuleOptions::default(),
    );
    RkStatus::RkOk
}

/// Threshold a compound value: 1 positive, 0 neutral, -1 negative
/// (neutral band inclusive at ±0.1).
#[no_mangle]
pub extern "C" fn rk_sentiment_label(compound: c_double) -> c_int {
    match label_from_compound(compound, LabelThresholds::default()) {
        SentimentLabel::Positive => 1,
        SentimentLabel::Neutral => 0,
        SentimentLabel::Negative => -1,
    }
}

// ------------------------------------------------------------------- model

/// Preprocess the corpus (clean, tokenize, lemmatize, stopwords, project
/// onto the chosen vocabulary) and train a collapsed-Gibbs topic model.
/// `alpha <= 0` selects the 50/K default.
///
/// # Safety
/// `handle` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rk_model_train(
    handle: *const RkCorpus,
    vocabulary: RkVocabulary,
    k: size_t,
    alpha: c_double,
    beta: c_double,
    iterations: size_t,
    seed: u64,
    out: *mut *mut RkModel,
) -> RkStatus {
    let Some(corpus) = handle.as_ref() else {
        return fail(RkStatus::RkErrNullPointer, "null corpus handle");
    };
    if out.is_null() {
        return fail(RkStatus::RkErrNullPointer, "null output handle");
    }
    let category = match vocabulary {
        RkVocabulary::RkVocabQualitative => WordCategory::Qualitative,
        RkVocabulary::RkVocabContent => WordCategory::Content,
    };
    let lemmatizer = Lemmatizer::bundled();
    let stopwords = StopwordList::bundled();
    let lexicon = CategoryLexicon::bundled();
    let docs: Vec<TokenDoc> = corpus
        .inner
        .reviews()
        .iter()
        .map(|r| {
            let doc = textprep::preprocess_review(&r.review_id, &r.text, lemmatizer, stopwords);
            textprep::project_vocabulary(&doc, lexicon, category)
        })
        .filter(|d| !d.lemmas.is_empty())
        .collect();
    let config = lda::LdaConfig {
        k,
        alpha: (alpha > 0.0).then_some(alpha),
        beta,
        iterations,
        burn_in: 0,
        seed,
    };
    match lda::train_lda(&docs, &config) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(RkModel { model, docs }));
            RkStatus::RkOk
        }
        Err(e) => fail_with(e),
    }
}

/// # Safety
/// `handle` must come from a model-producing call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rk_model_free(handle: *mut RkModel) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live model handle.
#[no_mangle]
pub unsafe extern "C" fn rk_model_topic_count(handle: *const RkModel) -> size_t {
    handle.as_ref().map_or(0, |m| m.model.k)
}

/// # Safety
/// `handle` must be a live model handle.
#[no_mangle]
pub unsafe extern "C" fn rk_model_vocab_size(handle: *const RkModel) -> size_t {
    handle.as_ref().map_or(0, |m| m.model.vocab_size())
}

/// Copy the top word of `topic` at `rank` (0-based, by descending
/// probability, ties lexicographic) into `buf`.
///
/// # Safety
/// `handle` must be live and `buf` must hold `buf_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rk_model_top_word(
    handle: *const RkModel,
    topic: size_t,
    rank: size_t,
    buf: *mut c_char,
    buf_len: size_t,
) -> RkStatus {
    let Some(model) = handle.as_ref() else {
        return fail(RkStatus::RkErrNullPointer, "null model handle");
    };
    if topic >= model.model.k {
        return fail(
            RkStatus::RkErrInvalid,
            format!("topic {topic} out of range (K = {})", model.model.k),
        );
    }
    let summaries = match lda::top_words(&model.model, (rank + 1).min(model.model.vocab_size())) {
        Ok(s) => s,
        Err(e) => return fail_with(e),
    };
    match summaries[topic].top_words.get(rank) {
        Some(word) => write_buffer(word, buf, buf_len),
        None => fail(
            RkStatus::RkErrInvalid,
            format!("rank {rank} exceeds the vocabulary"),
        ),
    }
}

/// Corpus-level topic proportions (percentages summing to 100) over the
/// model's training documents. `out` must hold `len == k` doubles.
///
/// # Safety
/// `handle` must be live; `out` must point at `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rk_model_topic_proportions(
    handle: *const RkModel,
    out: *mut c_double,
    len: size_t,
) -> RkStatus {
    let Some(model) = handle.as_ref() else {
        return fail(RkStatus::RkErrNullPointer, "null model handle");
    };
    if out.is_null() {
        return fail(RkStatus::RkErrNullPointer, "null output array");
    }
    if len != model.model.k {
        return fail(
            RkStatus::RkErrBufferTooSmall,
            format!("need {} slots, got {len}", model.model.k),
        );
    }
    match lda::model_topic_proportions(&model.model) {
        Ok(props) => {
            std::ptr::copy_nonoverlapping(props.as_ptr(), out, props.len());
            RkStatus::RkOk
        }
        Err(e) => fail_with(e),
    }
}

/// C_umass coherence of the model's top-10 words over its training docs.
///
/// # Safety
/// `handle` must be live and `score` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rk_model_coherence_umass(
    handle: *const RkModel,
    epsilon: c_double,
    score: *mut c_double,
) -> RkStatus {
    coherence_common(handle, score, |topics, docs| {
        reviewkit::coherence::coherence_umass(topics, docs, epsilon).map(|s| s.score)
    })
}

/// C_v coherence of the model's top-10 words over its training docs.
///
/// # Safety
/// `handle` must be live and `score` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rk_model_coherence_cv(
    handle: *const RkModel,
    window: size_t,
    score: *mut c_double,
) -> RkStatus {
    coherence_common(handle, score, |topics, docs| {
        reviewkit::coherence::coherence_cv(topics, docs, window).map(|s| s.score)
    })
}

unsafe fn coherence_common(
    handle: *const RkModel,
    score: *mut c_double,
    compute: impl Fn(&[Vec<String>], &[TokenDoc]) -> reviewkit::Result<f64>,
) -> RkStatus {
    let Some(model) = handle.as_ref() else {
        return fail(RkStatus::RkErrNullPointer, "null model handle");
    };
    if score.is_null() {
        return fail(RkStatus::RkErrNullPointer, "null score pointer");
    }
    let top_n = 10.min(model.model.vocab_size());
    let topics: Vec<Vec<String>> = match lda::top_words(&model.model, top_n) {
        Ok(summaries) => summaries.into_iter().map(|s| s.top_words).collect(),
        Err(e) => return fail_with(e),
    };
    match compute(&topics, &model.docs) {
        Ok(value) => {
            *score = value;
            RkStatus::RkOk
        }
        Err(e) => fail_with(e),
    }
}

/// Persist the model as a JSON container.
///
/// # Safety
/// `handle` must be live and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rk_model_save(handle: *const RkModel, path: *const c_char) -> RkStatus {
    let Some(model) = handle.as_ref() else {
        return fail(RkStatus::RkErrNullPointer, "null model handle");
    };
    let path = match cstr_arg(path) {
        Ok(p) => PathBuf::from(p),
        Err(status) => return status,
    };
    match model.model.save(&path) {
        Ok(()) => RkStatus::RkOk,
        Err(e) => fail_with(e),
    }
}

/// Load a model saved by `rk_model_save`. The handle carries no training
/// documents, so the coherence calls reject it.
///
/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rk_model_load(path: *const c_char, out: *mut *mut RkModel) -> RkStatus {
    if out.is_null() {
        return fail(RkStatus::RkErrNullPointer, "null output handle");
    }
    let path = match cstr_arg(path) {
        Ok(p) => PathBuf::from(p),
        Err(status) => return status,
    };
    match TopicModel::load(&path) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(RkModel {
                model,
                docs: Vec::new(),
            }));
            RkStatus::RkOk
        }
        Err(e) => fail_with(e),
    }
}
