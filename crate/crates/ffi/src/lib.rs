//! C ABI over `chemtext`.
//!
//! Every function returns a [`CtkStatus`]. On failure the message is kept
//! per thread and read with [`ctk_last_error`]. Strings handed out are
//! NUL-terminated UTF-8 owned by the caller and released with
//! [`ctk_string_free`]; handles are released with their `_free` function.
//! Null handles passed to `_free` are ignored.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use chemtext::dataset::{build_index, Dataset, DatasetError, Mixture, MixtureSpec};
use chemtext::metrics::{
    align_predictions, generation_suite, score_predictions, sole_template, GenerationConfig, MatchMode,
    PredictionRecord, ScoreOptions,
};
use chemtext::mol::{canonical_equal_with, canonicalize, parse_smiles, randomize_smiles, CanonOptions};
use chemtext::prompt::{format_instance, DecodeMode, TaskInstance, TaskKind, TemplateSet};
use chemtext::tokenizer::{
    detect_smiles_spans, extend_vocabulary, tokenize_mixed, tokenize_smiles, UnknownPolicy, Vocabulary,
    WhitespaceTokenizer,
};
use serde::Deserialize;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtkStatus {
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// A string argument was not UTF-8.
    InvalidUtf8 = 2,
    /// SMILES, JSON, template or vocabulary text was rejected.
    InvalidInput = 3,
    /// A data file no longer matches its index.
    DigestMismatch = 4,
    Io = 5,
    /// Scoring could not run on the given inputs.
    Metric = 6,
    /// An index was past the end.
    OutOfRange = 7,
    /// Internal failure; the call had no effect.
    Panic = 8,
}

pub struct CtkVocabulary(Vocabulary);
pub struct CtkTemplateSet(TemplateSet);
pub struct CtkDataset(Dataset);
pub struct CtkMixture(Mixture);

struct Failure(CtkStatus, String);

type Res<T> = Result<T, Failure>;

fn invalid(e: impl ToString) -> Failure {
    Failure(CtkStatus::InvalidInput, e.to_string())
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        let status = match e {
            DatasetError::Io { .. } => CtkStatus::Io,
            DatasetError::DigestMismatch { .. } | DatasetError::BadIndex { .. } => CtkStatus::DigestMismatch,
            DatasetError::OutOfRange { .. } => CtkStatus::OutOfRange,
            DatasetError::Mixture(_) => CtkStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Res<()>) -> CtkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtkStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&msg);
            CtkStatus::Panic
        }
    }
}

unsafe fn arg<'a>(p: *const c_char, name: &str) -> Res<&'a str> {
    if p.is_null() {
        return Err(Failure(CtkStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(CtkStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn opt_arg<'a>(p: *const c_char, name: &str) -> Res<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        arg(p, name).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Res<&'a T> {
    p.as_ref().ok_or_else(|| Failure(CtkStatus::NullArgument, format!("{name} is null")))
}

unsafe fn put<T>(out: *mut T, value: T, name: &str) -> Res<()> {
    if out.is_null() {
        return Err(Failure(CtkStatus::NullArgument, format!("{name} is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String, name: &str) -> Res<()> {
    let c = CString::new(s).map_err(|_| invalid("output contains NUL"))?;
    put(out, c.into_raw(), name)
}

unsafe fn put_box<T>(out: *mut *mut T, value: T, name: &str) -> Res<()> {
    if out.is_null() {
        return Err(Failure(CtkStatus::NullArgument, format!("{name} is null")));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

fn nonempty_lines(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect()
}

/// Toolkit version, static storage.
#[no_mangle]
pub extern "C" fn ctk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn ctk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `ids` must be null or an array returned by this library with its length.
#[no_mangle]
pub unsafe extern "C" fn ctk_ids_free(ids: *mut u32, len: usize) {
    if !ids.is_null() {
        drop(Vec::from_raw_parts(ids, len, len));
    }
}

/// Canonical SMILES. Invalid input fails with `kind@position: message`.
///
/// # Safety
/// `smiles` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_canonical_smiles(
    smiles: *const c_char,
    ignore_stereo: bool,
    out: *mut *mut c_char,
) -> CtkStatus {
    guard(|| {
        let s = arg(smiles, "smiles")?;
        let c = canonicalize(s, &CanonOptions { ignore_stereo }).map_err(invalid)?;
        put_string(out, c, "out")
    })
}

/// Writes whether both strings denote the same molecule. When either is
/// invalid, writes false and fails with its diagnostic.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_canonical_equal(
    a: *const c_char,
    b: *const c_char,
    ignore_stereo: bool,
    out: *mut bool,
) -> CtkStatus {
    guard(|| {
        let (a, b) = (arg(a, "a")?, arg(b, "b")?);
        put(out, false, "out")?;
        let eq = canonical_equal_with(a, b, &CanonOptions { ignore_stereo }).map_err(invalid)?;
        put(out, eq, "out")
    })
}

/// A seeded random depth-first rendering of the molecule.
///
/// # Safety
/// `smiles` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_randomize_smiles(smiles: *const c_char, seed: u64, out: *mut *mut c_char) -> CtkStatus {
    guard(|| {
        let mol = parse_smiles(arg(smiles, "smiles")?).map_err(invalid)?;
        put_string(out, randomize_smiles(&mol, seed), "out")
    })
}

/// Space-joined SMILES tokens, `<sm_...>` wrapped when `wrap` is set.
///
/// # Safety
/// `smiles` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_tokenize_smiles(smiles: *const c_char, wrap: bool, out: *mut *mut c_char) -> CtkStatus {
    guard(|| {
        let toks = tokenize_smiles(arg(smiles, "smiles")?).map_err(invalid)?;
        let parts: Vec<String> = toks.into_iter().map(|t| if wrap { t.wrapped() } else { t.surface }).collect();
        put_string(out, parts.join(" "), "out")
    })
}

/// Vocabulary from one token per line (line number = id). With
/// `add_specials` the special tokens are prepended.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_vocabulary_new(
    text: *const c_char,
    add_specials: bool,
    out: *mut *mut CtkVocabulary,
) -> CtkStatus {
    guard(|| {
        let lines = arg(text, "text")?.lines();
        let v = if add_specials { Vocabulary::with_specials(lines) } else { Vocabulary::from_tokens(lines) };
        put_box(out, CtkVocabulary(v.map_err(invalid)?), "out")
    })
}

/// # Safety
/// `v` must be null or a live vocabulary handle.
#[no_mangle]
pub unsafe extern "C" fn ctk_vocabulary_free(v: *mut CtkVocabulary) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// # Safety
/// `v` must be a live vocabulary handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_vocabulary_len(v: *const CtkVocabulary, out: *mut usize) -> CtkStatus {
    guard(|| put(out, handle(v, "vocabulary")?.0.len(), "out"))
}

/// The vocabulary file text: one token per line.
///
/// # Safety
/// `v` must be a live vocabulary handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_vocabulary_write(v: *const CtkVocabulary, out: *mut *mut c_char) -> CtkStatus {
    guard(|| {
        let mut buf = Vec::new();
        handle(v, "vocabulary")?.0.write(&mut buf).map_err(|e| Failure(CtkStatus::Io, e.to_string()))?;
        put_string(out, String::from_utf8(buf).expect("tokens are UTF-8"), "out")
    })
}

/// Extends `base` with wrapped chemical tokens from a SMILES-per-line
/// corpus. Writes the new vocabulary, the plan file text and the number of
/// unlexable corpus lines.
///
/// # Safety
/// `base` must be a live handle; `corpus` a NUL-terminated string; the
/// out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_vocabulary_extend(
    base: *const CtkVocabulary,
    corpus: *const c_char,
    out_vocab: *mut *mut CtkVocabulary,
    out_plan: *mut *mut c_char,
    out_skipped: *mut usize,
) -> CtkStatus {
    guard(|| {
        let base = handle(base, "base")?;
        let lines = nonempty_lines(arg(corpus, "corpus")?);
        let (v, plan, skipped) = extend_vocabulary(&base.0, lines.iter().map(String::as_str));
        let mut buf = Vec::new();
        plan.write(&mut buf).map_err(|e| Failure(CtkStatus::Io, e.to_string()))?;
        if out_vocab.is_null() || out_plan.is_null() || out_skipped.is_null() {
            return Err(Failure(CtkStatus::NullArgument, "output pointer is null".into()));
        }
        put(out_skipped, skipped, "out_skipped")?;
        put_string(out_plan, String::from_utf8(buf).expect("plan is UTF-8"), "out_plan")?;
        put_box(out_vocab, CtkVocabulary(v), "out_vocab")
    })
}

/// Token ids for mixed text: detected SMILES become chemical tokens, prose
/// goes through the whitespace tokenizer. With `fail_unknown` an
/// out-of-vocabulary chemical token fails instead of mapping to `<unk>`.
/// Release the ids with [`ctk_ids_free`].
///
/// # Safety
/// `v` must be a live handle; `text` a NUL-terminated string; the out
/// pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_encode_text(
    v: *const CtkVocabulary,
    text: *const c_char,
    fail_unknown: bool,
    out_ids: *mut *mut u32,
    out_len: *mut usize,
) -> CtkStatus {
    guard(|| {
        let v = handle(v, "vocabulary")?;
        let policy = if fail_unknown { UnknownPolicy::Fail } else { UnknownPolicy::Substitute };
        let segs = detect_smiles_spans(arg(text, "text")?);
        let enc = tokenize_mixed(&segs, &WhitespaceTokenizer, &v.0, policy).map_err(invalid)?;
        if out_ids.is_null() || out_len.is_null() {
            return Err(Failure(CtkStatus::NullArgument, "output pointer is null".into()));
        }
        let mut ids = enc.ids.into_boxed_slice();
        put(out_len, ids.len(), "out_len")?;
        let ptr = ids.as_mut_ptr();
        std::mem::forget(ids);
        put(out_ids, ptr, "out_ids")
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_templates_bundled(out: *mut *mut CtkTemplateSet) -> CtkStatus {
    guard(|| put_box(out, CtkTemplateSet(TemplateSet::bundled()), "out"))
}

/// Templates from template-file text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_templates_parse(text: *const c_char, out: *mut *mut CtkTemplateSet) -> CtkStatus {
    guard(|| {
        let set = TemplateSet::parse(arg(text, "text")?).map_err(invalid)?;
        put_box(out, CtkTemplateSet(set), "out")
    })
}

/// # Safety
/// `t` must be null or a live template-set handle.
#[no_mangle]
pub unsafe extern "C" fn ctk_templates_free(t: *mut CtkTemplateSet) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Renders one instance record (JSON) with a seeded template choice;
/// writes the formatted pair as JSON.
///
/// # Safety
/// `t` must be a live handle; `instance_json` a NUL-terminated string;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_format_instance(
    t: *const CtkTemplateSet,
    instance_json: *const c_char,
    seed: u64,
    out: *mut *mut c_char,
) -> CtkStatus {
    guard(|| {
        let set = &handle(t, "templates")?.0;
        let inst: TaskInstance = serde_json::from_str(arg(instance_json, "instance_json")?).map_err(invalid)?;
        let tmpl = set.select(&inst, seed).ok_or_else(|| invalid(format!("no template for task {}", inst.task)))?;
        let pair = format_instance(&inst, tmpl).map_err(invalid)?;
        put_string(out, serde_json::to_string(&pair).expect("pair serializes"), "out")
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreConfig {
    #[serde(default = "one")]
    k: usize,
    #[serde(default, rename = "match")]
    match_mode: MatchMode,
    template: Option<String>,
    labels: Option<Vec<String>>,
    #[serde(default)]
    strict: bool,
}

fn one() -> usize {
    1
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig { k: 1, match_mode: MatchMode::Canonical, template: None, labels: None, strict: false }
    }
}

fn jsonl<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Res<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| invalid(format!("{what} line {}: {e}", n + 1))))
        .collect()
}

/// Scores predictions against gold records, both JSONL text, as the
/// `score` command does. `options_json` (nullable) may set `k`, `match`
/// (`"exact"` or `"canonical"`), `template`, `labels` and `strict`;
/// `templates` (nullable) defaults to the bundled set. Writes one report
/// JSON object per line.
///
/// # Safety
/// String arguments must be NUL-terminated or null where allowed; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_score(
    task: *const c_char,
    gold_jsonl: *const c_char,
    pred_jsonl: *const c_char,
    options_json: *const c_char,
    templates: *const CtkTemplateSet,
    out: *mut *mut c_char,
) -> CtkStatus {
    guard(|| {
        let task: TaskKind = arg(task, "task")?.parse().map_err(invalid)?;
        let golds: Vec<TaskInstance> = jsonl(arg(gold_jsonl, "gold_jsonl")?, "gold")?;
        let preds: Vec<PredictionRecord> = jsonl(arg(pred_jsonl, "pred_jsonl")?, "prediction")?;
        let cfg: ScoreConfig = match opt_arg(options_json, "options_json")? {
            Some(s) => serde_json::from_str(s).map_err(invalid)?,
            None => ScoreConfig::default(),
        };
        align_predictions(task, &golds, &preds).map_err(invalid)?;
        let bundled;
        let set = match templates.as_ref() {
            Some(t) => &t.0,
            None => {
                bundled = TemplateSet::bundled();
                &bundled
            }
        };
        let template = match &cfg.template {
            Some(id) => Some(set.get(id).cloned().ok_or_else(|| invalid(format!("unknown template {id:?}")))?),
            None => sole_template(set, &golds),
        };
        let opts = ScoreOptions {
            template,
            labels: cfg.labels,
            k: cfg.k,
            match_mode: cfg.match_mode,
            decode_mode: if cfg.strict { DecodeMode::Strict } else { DecodeMode::Aligned },
        };
        let outputs: Vec<Vec<String>> = preds.into_iter().map(PredictionRecord::into_outputs).collect();
        let reports =
            score_predictions(&golds, &outputs, &opts).map_err(|e| Failure(CtkStatus::Metric, e.to_string()))?;
        let lines: Vec<String> = reports.iter().map(|r| r.to_json_line()).collect();
        put_string(out, lines.join("\n"), "out")
    })
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenConfig {
    k: Option<usize>,
    p: Option<u32>,
}

/// Generation suite over SMILES-per-line texts. `train` and `test` may be
/// null; without a test set the distributional fields are null. An empty
/// non-null test set fails. `config_json` (nullable) may set `k` and `p`.
/// Writes the stats as JSON.
///
/// # Safety
/// String arguments must be NUL-terminated or null where allowed; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_generation_suite(
    gen: *const c_char,
    train: *const c_char,
    test: *const c_char,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> CtkStatus {
    guard(|| {
        let gen = nonempty_lines(arg(gen, "gen")?);
        let train = opt_arg(train, "train")?.map(nonempty_lines).unwrap_or_default();
        let test = match opt_arg(test, "test")? {
            Some(t) => {
                let t = nonempty_lines(t);
                if t.is_empty() {
                    return Err(invalid("empty test set"));
                }
                t
            }
            None => Vec::new(),
        };
        let c: GenConfig = match opt_arg(config_json, "config_json")? {
            Some(s) => serde_json::from_str(s).map_err(invalid)?,
            None => GenConfig::default(),
        };
        let cfg = GenerationConfig { k: c.k.unwrap_or(gen.len().min(10_000)), p: c.p.unwrap_or(1), ..Default::default() };
        let stats =
            generation_suite(&gen, &train, &test, &cfg).map_err(|e| Failure(CtkStatus::Metric, e.to_string()))?;
        put_string(out, serde_json::to_string(&stats).expect("stats serialize"), "out")
    })
}

/// Writes the `.nidx` sidecar for a newline-delimited file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_dataset_build_index(path: *const c_char, out_count: *mut u64) -> CtkStatus {
    guard(|| {
        let idx = build_index(Path::new(arg(path, "path")?))?;
        put(out_count, idx.record_count() as u64, "out_count")
    })
}

/// Opens a file with its verified index.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_dataset_open(path: *const c_char, out: *mut *mut CtkDataset) -> CtkStatus {
    guard(|| {
        let d = Dataset::open(Path::new(arg(path, "path")?))?;
        put_box(out, CtkDataset(d), "out")
    })
}

/// # Safety
/// `d` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn ctk_dataset_free(d: *mut CtkDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `d` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_dataset_len(d: *const CtkDataset, out: *mut u64) -> CtkStatus {
    guard(|| put(out, handle(d, "dataset")?.0.len() as u64, "out"))
}

/// Borrows record `i` (without its newline). The bytes stay valid until the
/// handle is freed.
///
/// # Safety
/// `d` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_dataset_get(
    d: *const CtkDataset,
    i: u64,
    out_ptr: *mut *const u8,
    out_len: *mut usize,
) -> CtkStatus {
    guard(|| {
        let d = handle(d, "dataset")?;
        let rec = d.0.get_record(usize::try_from(i).unwrap_or(usize::MAX))?;
        if out_ptr.is_null() || out_len.is_null() {
            return Err(Failure(CtkStatus::NullArgument, "output pointer is null".into()));
        }
        put(out_len, rec.len(), "out_len")?;
        put(out_ptr, rec.as_ptr(), "out_ptr")
    })
}

/// Opens a mixture spec (JSON file); every component index is verified.
///
/// # Safety
/// `spec_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_mixture_open(spec_path: *const c_char, out: *mut *mut CtkMixture) -> CtkStatus {
    guard(|| {
        let spec = MixtureSpec::load(Path::new(arg(spec_path, "spec_path")?))?;
        put_box(out, CtkMixture(Mixture::open(spec)?), "out")
    })
}

/// # Safety
/// `m` must be null or a live mixture handle.
#[no_mangle]
pub unsafe extern "C" fn ctk_mixture_free(m: *mut CtkMixture) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// The first `n` seeded draws, written to caller arrays of length `n`.
///
/// # Safety
/// `m` must be a live handle; `components` and `records` must each hold
/// `n` elements.
#[no_mangle]
pub unsafe extern "C" fn ctk_mixture_sample(
    m: *const CtkMixture,
    n: usize,
    components: *mut usize,
    records: *mut usize,
) -> CtkStatus {
    guard(|| {
        let m = handle(m, "mixture")?;
        if n > 0 && (components.is_null() || records.is_null()) {
            return Err(Failure(CtkStatus::NullArgument, "output array is null".into()));
        }
        for (k, (c, r)) in m.0.sample(n).enumerate() {
            components.add(k).write(c);
            records.add(k).write(r);
        }
        Ok(())
    })
}

/// Borrows record `record` of component `component`; valid until the
/// handle is freed.
///
/// # Safety
/// `m` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctk_mixture_record(
    m: *const CtkMixture,
    component: usize,
    record: usize,
    out_ptr: *mut *const u8,
    out_len: *mut usize,
) -> CtkStatus {
    guard(|| {
        let m = handle(m, "mixture")?;
        if component >= m.0.datasets.len() {
            return Err(Failure(CtkStatus::OutOfRange, format!("component {component} of {}", m.0.datasets.len())));
        }
        let rec = m.0.record(component, record)?;
        if out_ptr.is_null() || out_len.is_null() {
            return Err(Failure(CtkStatus::NullArgument, "output pointer is null".into()));
        }
        put(out_len, rec.len(), "out_len")?;
        put(out_ptr, rec.as_ptr(), "out_ptr")
    })
}
