//! Rendering task instances into text pairs and decoding model outputs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::tokenizer::{detect_smiles_spans, tokenize_smiles, SegmentKind};

/// Template file shipped with the crate.
pub const BUNDLED_TEMPLATES: &str = include_str!("../data/templates.txt");

macro_rules! task_kinds {
    ($($v:ident => $s:literal),* $(,)?) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum TaskKind { $($v),* }

        impl TaskKind {
            pub const ALL: &'static [TaskKind] = &[$(TaskKind::$v),*];

            pub fn as_str(self) -> &'static str {
                match self { $(TaskKind::$v => $s),* }
            }
        }

        impl FromStr for TaskKind {
            type Err = UnknownTask;
            fn from_str(s: &str) -> Result<Self, UnknownTask> {
                match s { $($s => Ok(TaskKind::$v),)* _ => Err(UnknownTask(s.to_string())) }
            }
        }
    };
}

task_kinds! {
    Ner => "ner",
    Pico => "pico",
    Entailment => "entailment",
    RelationExtraction => "relation_extraction",
    SentenceSimilarity => "sentence_similarity",
    DocClassification => "doc_classification",
    QaYesno => "qa_yesno",
    QaMultichoice => "qa_multichoice",
    QaOpen => "qa_open",
    PropClassification => "prop_classification",
    PropRegression => "prop_regression",
    MolGeneration => "mol_generation",
    ForwardReaction => "forward_reaction",
    ReagentPrediction => "reagent_prediction",
    Retrosynthesis => "retrosynthesis",
    MolToText => "mol_to_text",
    TextToMol => "text_to_mol",
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("unknown task kind {0:?}")]
pub struct UnknownTask(pub String);

impl TaskKind {
    /// Tasks whose targets are marked-up copies of the input text.
    pub fn is_span_task(self) -> bool {
        matches!(self, TaskKind::Ner | TaskKind::Pico)
    }

    /// Tasks with a real-valued target.
    pub fn is_numeric(self) -> bool {
        matches!(self, TaskKind::PropRegression | TaskKind::SentenceSimilarity)
    }

    /// Tasks whose target is one label out of a fixed set.
    pub fn is_classification(self) -> bool {
        matches!(
            self,
            TaskKind::Entailment
                | TaskKind::RelationExtraction
                | TaskKind::DocClassification
                | TaskKind::QaYesno
                | TaskKind::QaMultichoice
                | TaskKind::PropClassification
        )
    }

    /// Tasks whose target is a SMILES string.
    pub fn is_molecular_output(self) -> bool {
        matches!(
            self,
            TaskKind::MolGeneration
                | TaskKind::ForwardReaction
                | TaskKind::ReagentPrediction
                | TaskKind::Retrosynthesis
                | TaskKind::TextToMol
        )
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for TaskKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TaskKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Labelled character range `[start, end)`; serialized as `[start, end, type]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(3)?;
        t.serialize_element(&self.start)?;
        t.serialize_element(&self.end)?;
        t.serialize_element(&self.kind)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (start, end, kind) = <(usize, usize, String)>::deserialize(d)?;
        Ok(Span { start, end, kind })
    }
}

/// One dataset record (the JSONL wire schema).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub task: TaskKind,
    pub id: String,
    #[serde(default)]
    pub fields: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spans: Vec<Span>,
}

impl TaskInstance {
    /// Text the spans index into: `target_text` when present, else `text`.
    pub fn span_text(&self) -> Option<&str> {
        self.fields
            .get("target_text")
            .or_else(|| self.fields.get("text"))
            .and_then(Value::as_str)
    }

    pub fn field_str(&self, name: &str) -> Option<&str> {
        self.fields.get(name).and_then(Value::as_str)
    }
}

/// How marker strings sit against the span they enclose.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MarkerSpacing {
    /// `open + " "` before and `" " + close` after.
    #[default]
    Tight,
    /// A space on both sides of each marker.
    Wide,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Markers {
    pub open: String,
    pub close: String,
    pub spacing: MarkerSpacing,
}

impl Markers {
    pub fn new(open: &str, close: &str) -> Markers {
        Markers { open: open.into(), close: close.into(), spacing: MarkerSpacing::Tight }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub task: TaskKind,
    /// Restricts the template to instances whose `dataset` field matches.
    pub dataset: Option<String>,
    pub pattern: String,
    pub target_pattern: String,
    pub markers: Option<Markers>,
    /// Only spans of this type are marked; all spans when unset.
    pub entity: Option<String>,
    pub labels: Vec<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Templates loaded from the record-per-paragraph file format.
#[derive(Clone, Debug, Default)]
pub struct TemplateSet {
    templates: Vec<PromptTemplate>,
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('s') => out.push(' '),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

impl TemplateSet {
    pub fn bundled() -> TemplateSet {
        TemplateSet::parse(BUNDLED_TEMPLATES).expect("bundled templates parse")
    }

    /// Records are separated by blank lines; each line is `key: value`, with
    /// `\n`, `\t`, `\s` and `\\` escapes in values. `#` lines are comments.
    pub fn parse(text: &str) -> Result<TemplateSet, TemplateError> {
        let mut templates = Vec::new();
        let mut record: Vec<(usize, String, String)> = Vec::new();
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate().chain(std::iter::once((lines.len(), &""))) {
            if line.trim().is_empty() {
                if !record.is_empty() {
                    templates.push(Self::build(std::mem::take(&mut record), templates.len())?);
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once(':') else {
                return Err(TemplateError::Syntax { line: i + 1, message: "expected key: value".into() });
            };
            let v = v.strip_prefix(' ').unwrap_or(v);
            record.push((i + 1, k.trim().to_string(), unescape(v)));
        }
        Ok(TemplateSet { templates })
    }

    fn build(record: Vec<(usize, String, String)>, index: usize) -> Result<PromptTemplate, TemplateError> {
        let first = record[0].0;
        let err = |line: usize, m: String| TemplateError::Syntax { line, message: m };
        let mut id = None;
        let mut task = None;
        let mut dataset = None;
        let mut input = None;
        let mut target = None;
        let mut markers: Option<Markers> = None;
        let mut spacing = MarkerSpacing::Tight;
        let mut entity = None;
        let mut labels = Vec::new();
        for (line, k, v) in record {
            match k.as_str() {
                "id" => id = Some(v),
                "task" => task = Some(v.parse::<TaskKind>().map_err(|e| err(line, e.to_string()))?),
                "dataset" => dataset = Some(v),
                "input" => input = Some(v),
                "target" => target = Some(v),
                "markers" => {
                    let parts: Vec<&str> = v.split_whitespace().collect();
                    let [open, close] = parts[..] else {
                        return Err(err(line, "markers needs two strings".into()));
                    };
                    markers = Some(Markers::new(open, close));
                }
                "marker_spacing" => {
                    spacing = match v.trim() {
                        "tight" => MarkerSpacing::Tight,
                        "wide" => MarkerSpacing::Wide,
                        other => return Err(err(line, format!("unknown marker spacing {other:?}"))),
                    }
                }
                "entity" => entity = Some(v),
                "labels" => labels = v.split('|').map(|s| s.trim().to_string()).collect(),
                other => return Err(err(line, format!("unknown field {other:?}"))),
            }
        }
        let task = task.ok_or_else(|| err(first, "missing task".into()))?;
        if let Some(m) = markers.as_mut() {
            m.spacing = spacing;
        }
        if task.is_span_task() != markers.is_some() {
            return Err(err(first, format!("markers are required exactly for span tasks ({task})")));
        }
        Ok(PromptTemplate {
            id: id.unwrap_or_else(|| format!("{task}-{index}")),
            task,
            dataset,
            pattern: input.ok_or_else(|| err(first, "missing input".into()))?,
            target_pattern: target.ok_or_else(|| err(first, "missing target".into()))?,
            markers,
            entity,
            labels,
        })
    }

    pub fn templates(&self) -> &[PromptTemplate] {
        &self.templates
    }

    pub fn get(&self, id: &str) -> Option<&PromptTemplate> {
        self.templates.iter().find(|t| t.id == id)
    }

    /// Templates usable for `inst`: same task, and same dataset when the
    /// instance names one that some template targets.
    pub fn candidates(&self, inst: &TaskInstance) -> Vec<&PromptTemplate> {
        let same_task: Vec<&PromptTemplate> = self.templates.iter().filter(|t| t.task == inst.task).collect();
        let ds = inst.field_str("dataset");
        let exact: Vec<&PromptTemplate> =
            same_task.iter().copied().filter(|t| t.dataset.is_some() && t.dataset.as_deref() == ds).collect();
        if !exact.is_empty() {
            return exact;
        }
        same_task.into_iter().filter(|t| t.dataset.is_none()).collect()
    }

    /// Seeded choice among [`TemplateSet::candidates`]; the draw depends only
    /// on the seed and the instance id.
    pub fn select(&self, inst: &TaskInstance, seed: u64) -> Option<&PromptTemplate> {
        let c = self.candidates(inst);
        if c.is_empty() {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(inst.id.as_bytes()));
        Some(c[rng.gen_range(0..c.len())])
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormattedPair {
    pub input: String,
    pub target: String,
    pub template_id: String,
    pub instance_id: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("template {template} is for {expected}, instance is {found}")]
    TaskMismatch { template: String, expected: TaskKind, found: TaskKind },
    #[error("missing slot {0:?}")]
    MissingSlot(String),
    #[error("slot {slot:?}: {message}")]
    BadValue { slot: String, message: String },
    #[error("unbalanced brace in template at byte {0}")]
    Brace(usize),
    #[error("no template for task {0}")]
    NoTemplate(TaskKind),
    #[error(transparent)]
    Span(#[from] SpanError),
}

/// Six-decimal rendering used for every real-valued target.
pub fn format_real(x: f64) -> String {
    format!("{x:.6}")
}

/// Shortest round-trip rendering that keeps a decimal point ("4.0", "2.2").
pub fn format_score(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum NumStyle {
    Plain,
    Fixed,
    Score,
}

fn render_value(slot: &str, v: &Value, style: NumStyle) -> Result<String, FormatError> {
    Ok(match v {
        Value::String(s) => s.clone(),
        Value::Number(n) if style == NumStyle::Fixed => format_real(n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) if style == NumStyle::Score => format_score(n.as_f64().unwrap_or(f64::NAN)),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.to_string(),
            None => format_real(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => {
            let mut lines = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                let letter = choice_letter(i).ok_or_else(|| FormatError::BadValue {
                    slot: slot.into(),
                    message: "more than 26 choices".into(),
                })?;
                lines.push(format!("({letter}) {}", render_value(slot, item, NumStyle::Plain)?));
            }
            lines.join("\n")
        }
        Value::Null | Value::Object(_) => {
            return Err(FormatError::BadValue { slot: slot.into(), message: "unsupported value".into() })
        }
    })
}

pub fn choice_letter(i: usize) -> Option<char> {
    (i < 26).then(|| (b'A' + i as u8) as char)
}

/// Substitutes `{slot}` occurrences; `{{` and `}}` are literal braces.
fn substitute(pattern: &str, lookup: &dyn Fn(&str) -> Result<String, FormatError>) -> Result<String, FormatError> {
    let mut out = String::with_capacity(pattern.len());
    let mut rest = pattern;
    let mut offset = 0;
    while let Some(i) = rest.find(['{', '}']) {
        out.push_str(&rest[..i]);
        let c = rest.as_bytes()[i];
        if rest[i + 1..].starts_with(c as char) {
            out.push(c as char);
            rest = &rest[i + 2..];
            offset += i + 2;
            continue;
        }
        if c == b'}' {
            return Err(FormatError::Brace(offset + i));
        }
        let Some(close) = rest[i + 1..].find('}') else {
            return Err(FormatError::Brace(offset + i));
        };
        out.push_str(&lookup(&rest[i + 1..i + 1 + close])?);
        rest = &rest[i + 2 + close..];
        offset += i + 2 + close;
    }
    out.push_str(rest);
    Ok(out)
}

/// Renders `inst` through `tmpl`. Span tasks expose the marked text as the
/// `{marked}` slot. Property regression targets get six decimals; similarity
/// scores keep their shortest decimal form.
pub fn format_instance(inst: &TaskInstance, tmpl: &PromptTemplate) -> Result<FormattedPair, FormatError> {
    if tmpl.task != inst.task {
        return Err(FormatError::TaskMismatch { template: tmpl.id.clone(), expected: tmpl.task, found: inst.task });
    }
    let lookup_input = |slot: &str| -> Result<String, FormatError> {
        let v = inst.fields.get(slot).ok_or_else(|| FormatError::MissingSlot(slot.into()))?;
        render_value(slot, v, NumStyle::Plain)
    };
    let input = substitute(&tmpl.pattern, &lookup_input)?;
    let marked = match (&tmpl.markers, inst.task.is_span_task()) {
        (Some(m), true) => {
            let text = inst.span_text().ok_or_else(|| FormatError::MissingSlot("text".into()))?;
            let ranges: Vec<(usize, usize)> = inst
                .spans
                .iter()
                .filter(|s| tmpl.entity.as_ref().is_none_or(|e| *e == s.kind))
                .map(|s| (s.start, s.end))
                .collect();
            Some(encode_spans(text, &ranges, m)?)
        }
        _ => None,
    };
    let lookup_target = |slot: &str| -> Result<String, FormatError> {
        if slot == "marked" {
            if let Some(m) = &marked {
                return Ok(m.clone());
            }
        }
        let v = inst.fields.get(slot).ok_or_else(|| FormatError::MissingSlot(slot.into()))?;
        let style = match (inst.task, slot) {
            (TaskKind::PropRegression, "target") => NumStyle::Fixed,
            (TaskKind::SentenceSimilarity, "target") => NumStyle::Score,
            _ => NumStyle::Plain,
        };
        render_value(slot, v, style)
    };
    let target = substitute(&tmpl.target_pattern, &lookup_target)?;
    Ok(FormattedPair { input, target, template_id: tmpl.id.clone(), instance_id: inst.id.clone() })
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SpanError {
    #[error("span {0:?} is out of range")]
    OutOfRange((usize, usize)),
    #[error("spans {0:?} and {1:?} overlap or are unsorted")]
    Overlap((usize, usize), (usize, usize)),
    #[error("span {0:?} does not fall on token boundaries")]
    Boundary((usize, usize)),
}

/// Whitespace-delimited tokens as (char start, char end, text).
pub fn word_tokens(text: &str) -> Vec<(usize, usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut n = 0;
    for (ci, (bi, c)) in text.char_indices().enumerate() {
        n = ci + 1;
        match (c.is_whitespace(), start) {
            (true, Some((cs, bs))) => {
                out.push((cs, ci, &text[bs..bi]));
                start = None;
            }
            (false, None) => start = Some((ci, bi)),
            _ => {}
        }
    }
    if let Some((cs, bs)) = start {
        out.push((cs, n, &text[bs..]));
    }
    out
}

fn byte_offset(text: &str, char_pos: usize) -> usize {
    text.char_indices().nth(char_pos).map_or(text.len(), |(b, _)| b)
}

/// Inserts markers around each character span. Spans must be sorted,
/// disjoint, and start and end on whitespace-token boundaries.
pub fn encode_spans(text: &str, spans: &[(usize, usize)], markers: &Markers) -> Result<String, SpanError> {
    let toks = word_tokens(text);
    let n_chars = text.chars().count();
    for (i, &(s, e)) in spans.iter().enumerate() {
        if s >= e || e > n_chars {
            return Err(SpanError::OutOfRange((s, e)));
        }
        if i > 0 && spans[i - 1].1 > s {
            return Err(SpanError::Overlap(spans[i - 1], (s, e)));
        }
        if !toks.iter().any(|t| t.0 == s) || !toks.iter().any(|t| t.1 == e) {
            return Err(SpanError::Boundary((s, e)));
        }
    }
    let (open, close) = match markers.spacing {
        MarkerSpacing::Tight => (format!("{} ", markers.open), format!(" {}", markers.close)),
        MarkerSpacing::Wide => (format!(" {} ", markers.open), format!(" {} ", markers.close)),
    };
    let mut out = String::with_capacity(text.len() + spans.len() * (open.len() + close.len()));
    let mut at = 0;
    for &(s, e) in spans {
        let (bs, be) = (byte_offset(text, s), byte_offset(text, e));
        out.push_str(&text[at..bs]);
        out.push_str(&open);
        out.push_str(&text[bs..be]);
        out.push_str(&close);
        at = be;
    }
    out.push_str(&text[at..]);
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DecodeMode {
    /// Align output tokens to the original by longest common subsequence.
    #[default]
    Aligned,
    /// Require the unmarked output tokens to equal the original tokens.
    Strict,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DecodedSpans {
    pub spans: Vec<(usize, usize)>,
    /// Markers dropped as unmatched or crossing, and runs that did not align.
    pub warnings: usize,
}

/// Index pairs of a longest common subsequence, preferring earliest matches.
fn lcs_pairs(a: &[&str], b: &[&str]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    let mut l = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            l[i][j] = if a[i] == b[j] { l[i + 1][j + 1] + 1 } else { l[i + 1][j].max(l[i][j + 1]) };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < n && j < m {
        if a[i] == b[j] && l[i][j] == l[i + 1][j + 1] + 1 {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if l[i + 1][j] >= l[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Recovers marked spans from a (possibly drifted) model output as character
/// ranges of `original`.
pub fn decode_spans(marked: &str, original: &str, markers: &Markers, mode: DecodeMode) -> DecodedSpans {
    let mut warnings = 0;
    let mut words: Vec<&str> = Vec::new();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut open_at: Option<usize> = None;
    for w in marked.split_whitespace() {
        if w == markers.open {
            if open_at.replace(words.len()).is_some() {
                warnings += 1;
            }
        } else if w == markers.close {
            match open_at.take() {
                Some(s) if s < words.len() => runs.push((s, words.len())),
                _ => warnings += 1,
            }
        } else {
            words.push(w);
        }
    }
    if open_at.is_some() {
        warnings += 1;
    }
    let orig = word_tokens(original);
    let orig_words: Vec<&str> = orig.iter().map(|t| t.2).collect();
    let align: Vec<Option<usize>> = match mode {
        DecodeMode::Strict if words == orig_words => (0..words.len()).map(Some).collect(),
        DecodeMode::Strict => {
            return DecodedSpans { spans: Vec::new(), warnings: warnings + runs.len() };
        }
        DecodeMode::Aligned => {
            let mut a = vec![None; words.len()];
            for (i, j) in lcs_pairs(&words, &orig_words) {
                a[i] = Some(j);
            }
            a
        }
    };
    let mut spans = Vec::new();
    for (s, e) in runs {
        let hit: Vec<usize> = align[s..e].iter().flatten().copied().collect();
        match (hit.first(), hit.last()) {
            (Some(&first), Some(&last)) => spans.push((orig[first].0, orig[last].1)),
            _ => warnings += 1,
        }
    }
    DecodedSpans { spans, warnings }
}

static FINAL_ANSWER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)final answer is\s*\(\s*([A-Za-z])\s*\)").unwrap());
static LEADING_LETTER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\(?([A-Za-z])(?:[).:,\s]|$)").unwrap());
static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?").unwrap());

/// Maps an output onto a label. The trimmed output (one trailing period
/// dropped) must equal a label ignoring case; multiple choice additionally
/// reads the letter from "final answer is (X)" or a bare leading letter.
pub fn parse_label(output: &str, task: TaskKind, label_set: &[String]) -> Option<String> {
    let trimmed = output.trim();
    if task == TaskKind::QaMultichoice {
        let letter = FINAL_ANSWER
            .captures(trimmed)
            .or_else(|| LEADING_LETTER.captures(trimmed))
            .map(|c| c[1].to_ascii_uppercase())?;
        return if label_set.is_empty() {
            Some(letter)
        } else {
            label_set.iter().find(|l| l.eq_ignore_ascii_case(&letter)).cloned()
        };
    }
    let body = trimmed.strip_suffix('.').unwrap_or(trimmed).trim_end();
    label_set.iter().find(|l| l.trim().eq_ignore_ascii_case(body)).cloned()
}

/// First decimal number in the output.
pub fn parse_numeric(output: &str) -> Option<f64> {
    NUMBER.find_iter(output).find_map(|m| m.as_str().parse::<f64>().ok())
}

/// The SMILES in an output: the whole trimmed output when it lexes, else the
/// longest detected SMILES word. Quotes and one trailing period are dropped.
pub fn extract_smiles(output: &str) -> Option<String> {
    let s = output.trim().trim_matches(|c| matches!(c, '"' | '\'' | '`')).trim();
    let s = s.strip_suffix('.').unwrap_or(s);
    if !s.is_empty() && tokenize_smiles(s).is_ok() {
        return Some(s.to_string());
    }
    detect_smiles_spans(s)
        .into_iter()
        .filter(|seg| seg.kind == SegmentKind::Smiles)
        .max_by_key(|seg| seg.content.len())
        .map(|seg| seg.content)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn inst(task: TaskKind, fields: Value) -> TaskInstance {
        TaskInstance {
            task,
            id: "x".into(),
            fields: serde_json::from_value(fields).unwrap(),
            spans: Vec::new(),
        }
    }

    fn tmpl(task: TaskKind, input: &str, target: &str) -> PromptTemplate {
        PromptTemplate {
            id: "t".into(),
            task,
            dataset: None,
            pattern: input.into(),
            target_pattern: target.into(),
            markers: None,
            entity: None,
            labels: Vec::new(),
        }
    }

    #[test]
    fn slot_substitution() {
        let i = inst(TaskKind::PropRegression, json!({"smiles": "CCO", "target": 1.0838971}));
        let t = tmpl(TaskKind::PropRegression, "logS of {smiles} {{x}}", "{target}");
        let p = format_instance(&i, &t).unwrap();
        assert_eq!(p.input, "logS of CCO {x}");
        assert_eq!(p.target, "1.083897");
        let t = tmpl(TaskKind::PropRegression, "{missing}", "{target}");
        assert_eq!(format_instance(&i, &t), Err(FormatError::MissingSlot("missing".into())));
        let t = tmpl(TaskKind::PropRegression, "{smiles", "{target}");
        assert!(matches!(format_instance(&i, &t), Err(FormatError::Brace(_))));
        let t = tmpl(TaskKind::Ner, "{smiles}", "{target}");
        assert!(matches!(format_instance(&i, &t), Err(FormatError::TaskMismatch { .. })));
    }

    #[test]
    fn integer_labels_and_choices() {
        let i = inst(TaskKind::PropClassification, json!({"target": 1}));
        assert_eq!(format_instance(&i, &tmpl(TaskKind::PropClassification, "", "{target}")).unwrap().target, "1");
        let i = inst(TaskKind::QaMultichoice, json!({"choices": ["x", "y"], "target": "B"}));
        let p = format_instance(&i, &tmpl(TaskKind::QaMultichoice, "{choices}", "The final answer is ({target}).")).unwrap();
        assert_eq!(p.input, "(A) x\n(B) y");
        assert_eq!(p.target, "The final answer is (B).");
    }

    #[test]
    fn spans_roundtrip() {
        let m = Markers::new("diso*", "*diso");
        let text = "a b c d";
        assert_eq!(encode_spans(text, &[], &m).unwrap(), text);
        let enc = encode_spans(text, &[(0, 1), (2, 3)], &m).unwrap();
        assert_eq!(enc, "diso* a *diso diso* b *diso c d");
        let dec = decode_spans(&enc, text, &m, DecodeMode::Aligned);
        assert_eq!(dec.spans, [(0, 1), (2, 3)]);
        assert_eq!(dec.warnings, 0);
        assert_eq!(encode_spans(text, &[(0, 2)], &m), Err(SpanError::Boundary((0, 2))));
        assert!(matches!(encode_spans(text, &[(0, 3), (2, 3)], &m), Err(SpanError::Overlap(..))));
        assert!(matches!(encode_spans(text, &[(0, 30)], &m), Err(SpanError::OutOfRange(_))));
    }

    #[test]
    fn wide_markers() {
        let m = Markers { spacing: MarkerSpacing::Wide, ..Markers::new("I*", "*I") };
        let enc = encode_spans("x : y z w", &[(4, 7)], &m).unwrap();
        assert_eq!(enc, "x :  I* y z *I  w");
        assert_eq!(decode_spans(&enc, "x : y z w", &m, DecodeMode::Aligned).spans, [(4, 7)]);
    }

    #[test]
    fn decode_tolerates_damage() {
        let m = Markers::new("diso*", "*diso");
        let original = "the adenomatous polyposis coli tumour suppressor";
        let d = decode_spans("the diso* adenomatous polyposis coli tumour suppressor", original, &m, DecodeMode::Aligned);
        assert_eq!((d.spans.len(), d.warnings), (0, 1));
        let d = decode_spans(
            "the diso* adenomatous POLYPOSIS coli tumour *diso suppressor",
            original,
            &m,
            DecodeMode::Aligned,
        );
        assert_eq!(d.spans, [(4, 37)]);
        let d = decode_spans(
            "the diso* adenomatous POLYPOSIS coli tumour *diso suppressor",
            original,
            &m,
            DecodeMode::Strict,
        );
        assert!(d.spans.is_empty());
        let d = decode_spans("*diso the suppressor", original, &m, DecodeMode::Aligned);
        assert_eq!(d.warnings, 1);
    }

    #[test]
    fn labels() {
        let yn: Vec<String> = vec!["Yes".into(), "No".into()];
        assert_eq!(parse_label("Yes", TaskKind::QaYesno, &yn).as_deref(), Some("Yes"));
        assert_eq!(parse_label(" yes. ", TaskKind::QaYesno, &yn).as_deref(), Some("Yes"));
        let ynm: Vec<String> = vec!["yes".into(), "no".into(), "maybe".into()];
        assert_eq!(parse_label("maybe so", TaskKind::QaYesno, &ynm), None);
        let abcd: Vec<String> = "ABCD".chars().map(String::from).collect();
        assert_eq!(parse_label("The final answer is (D).", TaskKind::QaMultichoice, &abcd).as_deref(), Some("D"));
        assert_eq!(parse_label("c) Urokinase", TaskKind::QaMultichoice, &abcd).as_deref(), Some("C"));
        assert_eq!(parse_label("The answer", TaskKind::QaMultichoice, &abcd), None);
    }

    #[test]
    fn numbers_and_smiles() {
        assert_eq!(parse_numeric("-1.013714"), Some(-1.013714));
        assert_eq!(parse_numeric("0.0035"), Some(0.0035));
        assert_eq!(parse_numeric("about 2e-3 units"), Some(0.002));
        assert_eq!(parse_numeric("no idea"), None);
        assert_eq!(extract_smiles("Cc1ccc(B(O)O)cc1.Nc1ccccc1I").as_deref(), Some("Cc1ccc(B(O)O)cc1.Nc1ccccc1I"));
        assert_eq!(extract_smiles("[Na+].[OH-]").as_deref(), Some("[Na+].[OH-]"));
        assert_eq!(extract_smiles(" \"CCO\" ").as_deref(), Some("CCO"));
        assert_eq!(extract_smiles("C#Cc1ccc(C=O)cc1.").as_deref(), Some("C#Cc1ccc(C=O)cc1"));
        assert_eq!(extract_smiles("the product is CCO here").as_deref(), Some("CCO"));
        assert_eq!(extract_smiles("I cannot answer"), None);
    }

    #[test]
    fn template_file_format() {
        let t = TemplateSet::parse(
            "# c\ntask: ner\nid: n1\ninput: Find {text}\\nnow\ntarget: {marked}\nmarkers: a* *a\n\ntask: qa_open\ninput: {q}\ntarget: {target}\n",
        )
        .unwrap();
        assert_eq!(t.templates().len(), 2);
        assert_eq!(t.templates()[0].pattern, "Find {text}\nnow");
        assert_eq!(t.templates()[1].id, "qa_open-1");
        assert!(TemplateSet::parse("task: ner\ninput: x\ntarget: y\n").is_err());
        assert!(TemplateSet::parse("task: qa_open\ninput: x\ntarget: y\nmarkers: a b\n").is_err());
        assert!(TemplateSet::parse("task: nope\ninput: x\ntarget: y\n").is_err());
    }

    #[test]
    fn seeded_selection_is_stable() {
        let set = TemplateSet::parse("task: qa_open\ninput: a {q}\ntarget: {target}\n\ntask: qa_open\ninput: b {q}\ntarget: {target}\n").unwrap();
        let i = inst(TaskKind::QaOpen, json!({"q": "?", "target": "!"}));
        let a = set.select(&i, 5).unwrap().id.clone();
        for _ in 0..3 {
            assert_eq!(set.select(&i, 5).unwrap().id, a);
        }
        let ids: std::collections::HashSet<_> = (0..64).map(|s| set.select(&i, s).unwrap().id.clone()).collect();
        assert_eq!(ids.len(), 2);
    }
}
