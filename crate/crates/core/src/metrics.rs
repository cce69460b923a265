//! Scores for every task family, including the generative suite.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::descriptors::{
    descriptor_vector, fragment_molecule, morgan_fingerprint, scaffold_smiles, tanimoto, Fingerprint,
    DEFAULT_RADIUS, DEFAULT_WIDTH, DESCRIPTOR_LEN, FINGERPRINT_SEED,
};
use crate::mol::{canonical_smiles, canonicalize, normalize, parse_smiles, validate, CanonOptions, Molecule};
use crate::pattern::{passes_filters, FilterConfig};
use crate::prompt::{
    decode_spans, extract_smiles, parse_label, parse_numeric, word_tokens, DecodeMode, Span, TaskInstance,
    TaskKind, PromptTemplate, TemplateSet,
};
use crate::tokenizer::tokenize_smiles;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("gold and prediction lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("document id mismatch at {index}: {gold:?} vs {pred:?}")]
    IdMismatch { index: usize, gold: String, pred: String },
    #[error("need at least {needed} items, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("k = {k} exceeds the {n} generated molecules")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("gold record {0} has no usable target")]
    BadGold(String),
    #[error("record {index}: task {found} but scoring {expected}")]
    TaskMismatch { index: usize, found: TaskKind, expected: TaskKind },
    #[error("{0}")]
    Config(String),
}

/// One scored metric; serializes to exactly the six report fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: TaskKind,
    pub metric_name: String,
    pub value: f64,
    pub support: usize,
    pub rejected: usize,
    pub config_digest: String,
    /// Set when the value is a convention (zero variance, empty sets).
    #[serde(skip)]
    pub degenerate: bool,
}

impl MetricReport {
    pub fn new(task: TaskKind, name: &str, value: f64, support: usize, rejected: usize, digest: &str) -> Self {
        MetricReport {
            task,
            metric_name: name.to_string(),
            value,
            support,
            rejected,
            config_digest: digest.to_string(),
            degenerate: false,
        }
    }

    fn flagged(mut self, degenerate: bool) -> Self {
        self.degenerate = degenerate;
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// SHA-256 hex of the compact JSON form of `params`.
pub fn config_digest(params: &Value) -> String {
    hex::encode(Sha256::digest(params.to_string().as_bytes()))
}

fn fingerprint_params(radius: usize, width: usize) -> Value {
    json!({"fingerprint": "circular", "radius": radius, "width": width, "seed": format!("{FINGERPRINT_SEED:#x}")})
}

/// Digests of the default parameter sets, keyed by metric family.
pub fn default_config_digests() -> BTreeMap<&'static str, String> {
    let mut out = BTreeMap::new();
    out.insert("bleu2", config_digest(&bleu_params("words")));
    out.insert("fingerprint", config_digest(&fingerprint_params(DEFAULT_RADIUS, DEFAULT_WIDTH)));
    out.insert("generation", GenerationConfig::default().digest());
    out.insert("span_decode", config_digest(&json!({"decode": "aligned"})));
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, other: Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Zero when precision and recall are both zero.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Exact (start, end, type) matches between two span sets.
pub fn span_confusion(gold: &[Span], pred: &[Span]) -> Confusion {
    let g: HashSet<&Span> = gold.iter().collect();
    let p: HashSet<&Span> = pred.iter().collect();
    let tp = g.intersection(&p).count();
    Confusion { tp, fp: p.len() - tp, fn_: g.len() - tp }
}

/// Micro-averaged entity F1 over documents aligned by id.
pub fn entity_f1(
    gold: &[(String, Vec<Span>)],
    pred: &[(String, Vec<Span>)],
) -> Result<MetricReport, MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch(gold.len(), pred.len()));
    }
    let mut c = Confusion::default();
    for (index, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.0 != p.0 {
            return Err(MetricError::IdMismatch { index, gold: g.0.clone(), pred: p.0.clone() });
        }
        c.add(span_confusion(&g.1, &p.1));
    }
    let digest = config_digest(&json!({"metric": "entity_f1", "match": "exact", "average": "micro"}));
    Ok(MetricReport::new(TaskKind::Ner, "entity_f1", c.f1(), gold.len(), 0, &digest))
}

/// Per-token positive flags for whitespace tokens covered by any span.
pub fn token_labels(text: &str, spans: &[(usize, usize)]) -> Vec<bool> {
    word_tokens(text).iter().map(|&(s, e, _)| spans.iter().any(|&(a, b)| s >= a && e <= b)).collect()
}

/// Micro F1 over positively labelled tokens.
pub fn word_f1(gold: &[Vec<bool>], pred: &[Vec<bool>]) -> Result<MetricReport, MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch(gold.len(), pred.len()));
    }
    let mut c = Confusion::default();
    for (g, p) in gold.iter().zip(pred) {
        if g.len() != p.len() {
            return Err(MetricError::LengthMismatch(g.len(), p.len()));
        }
        for (&a, &b) in g.iter().zip(p) {
            c.tp += (a && b) as usize;
            c.fp += (!a && b) as usize;
            c.fn_ += (a && !b) as usize;
        }
    }
    let digest = config_digest(&json!({"metric": "word_f1", "tokens": "whitespace", "average": "micro"}));
    Ok(MetricReport::new(TaskKind::Pico, "word_f1", c.f1(), gold.len(), 0, &digest))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationScores {
    pub accuracy: f64,
    /// Mean recall over classes present in the gold labels.
    pub balanced_accuracy: f64,
    /// F1 of the positive class, when one was named.
    pub positive_f1: Option<f64>,
    /// Unweighted F1 mean over labels seen in gold or predictions.
    pub macro_f1: f64,
    pub support: usize,
    pub rejected: usize,
}

/// The positive label of a binary set: one of `1`, `yes`, `true`,
/// `positive` (any case).
pub fn positive_label(label_set: &[String]) -> Option<&str> {
    if label_set.len() != 2 {
        return None;
    }
    label_set
        .iter()
        .find(|l| ["1", "yes", "true", "positive"].iter().any(|p| l.eq_ignore_ascii_case(p)))
        .map(String::as_str)
}

/// Accuracy, balanced accuracy and F1 variants. A `None` prediction is a
/// reject and never matches any label.
pub fn classification_scores(
    gold: &[String],
    pred: &[Option<String>],
    positive: Option<&str>,
) -> Result<ClassificationScores, MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch(gold.len(), pred.len()));
    }
    if gold.is_empty() {
        return Err(MetricError::TooFew { needed: 1, got: 0 });
    }
    let mut per: BTreeMap<&str, Confusion> = BTreeMap::new();
    let mut correct = 0;
    let mut rejected = 0;
    for (g, p) in gold.iter().zip(pred) {
        per.entry(g).or_default();
        match p {
            Some(p) if p == g => {
                correct += 1;
                per.get_mut(g.as_str()).unwrap().tp += 1;
            }
            Some(p) => {
                per.get_mut(g.as_str()).unwrap().fn_ += 1;
                per.entry(p).or_default().fp += 1;
            }
            None => {
                rejected += 1;
                per.get_mut(g.as_str()).unwrap().fn_ += 1;
            }
        }
    }
    let present: Vec<&Confusion> = per.values().filter(|c| c.tp + c.fn_ > 0).collect();
    let balanced_accuracy = present.iter().map(|c| c.recall()).sum::<f64>() / present.len() as f64;
    let macro_f1 = per.values().map(Confusion::f1).sum::<f64>() / per.len() as f64;
    let positive_f1 = positive.map(|l| per.get(l).copied().unwrap_or_default().f1());
    Ok(ClassificationScores {
        accuracy: correct as f64 / gold.len() as f64,
        balanced_accuracy,
        positive_f1,
        macro_f1,
        support: gold.len(),
        rejected,
    })
}

/// Rejected predictions replaced by the gold mean; returns the count.
fn impute(gold: &[f64], pred: &[Option<f64>]) -> (Vec<f64>, usize) {
    let mean = gold.iter().sum::<f64>() / gold.len() as f64;
    let rejected = pred.iter().filter(|p| p.is_none()).count();
    (pred.iter().map(|p| p.unwrap_or(mean)).collect(), rejected)
}

fn check_real(gold: &[f64], pred: &[Option<f64>]) -> Result<(), MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch(gold.len(), pred.len()));
    }
    if gold.len() < 2 {
        return Err(MetricError::TooFew { needed: 2, got: gold.len() });
    }
    Ok(())
}

/// Sample Pearson correlation; zero and flagged degenerate when either side
/// has no variance.
pub fn pearson(gold: &[f64], pred: &[Option<f64>]) -> Result<MetricReport, MetricError> {
    check_real(gold, pred)?;
    let (p, rejected) = impute(gold, pred);
    let n = gold.len() as f64;
    let (mg, mp) = (gold.iter().sum::<f64>() / n, p.iter().sum::<f64>() / n);
    let (mut sgp, mut sgg, mut spp) = (0.0, 0.0, 0.0);
    for (g, q) in gold.iter().zip(&p) {
        sgp += (g - mg) * (q - mp);
        sgg += (g - mg) * (g - mg);
        spp += (q - mp) * (q - mp);
    }
    let degenerate = sgg == 0.0 || spp == 0.0;
    let r = if degenerate { 0.0 } else { (sgp / (sgg.sqrt() * spp.sqrt())).clamp(-1.0, 1.0) };
    let digest = config_digest(&json!({"metric": "pearson", "reject": "gold_mean"}));
    Ok(MetricReport::new(TaskKind::SentenceSimilarity, "pearson", r, gold.len(), rejected, &digest).flagged(degenerate))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionScores {
    /// `None` when the gold values have no variance.
    pub r2: Option<f64>,
    pub rmse: f64,
    pub support: usize,
    pub rejected: usize,
}

pub fn regression_scores(gold: &[f64], pred: &[Option<f64>]) -> Result<RegressionScores, MetricError> {
    check_real(gold, pred)?;
    let (p, rejected) = impute(gold, pred);
    let n = gold.len() as f64;
    let mean = gold.iter().sum::<f64>() / n;
    let ss_res: f64 = gold.iter().zip(&p).map(|(g, q)| (g - q) * (g - q)).sum();
    let ss_tot: f64 = gold.iter().map(|g| (g - mean) * (g - mean)).sum();
    Ok(RegressionScores {
        r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
        rmse: (ss_res / n).sqrt(),
        support: gold.len(),
        rejected,
    })
}

/// Lower-cased words with punctuation split into separate tokens.
pub fn bleu_tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in s.to_lowercase().split_whitespace() {
        let mut cur = String::new();
        for c in word.chars() {
            if c.is_alphanumeric() {
                cur.push(c);
            } else {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

fn bleu_params(tokens: &str) -> Value {
    json!({"metric": "bleu", "max_n": 2, "weights": [0.5, 0.5], "tokens": tokens, "smoothing": "none"})
}

fn ngram_counts<'a>(toks: &'a [String], n: usize) -> HashMap<&'a [String], usize> {
    let mut m = HashMap::new();
    if toks.len() >= n {
        for w in toks.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus BLEU-2 over pre-tokenized pairs.
pub fn bleu2_tokens(refs: &[Vec<String>], hyps: &[Vec<String>]) -> Result<f64, MetricError> {
    if refs.len() != hyps.len() {
        return Err(MetricError::LengthMismatch(refs.len(), hyps.len()));
    }
    if refs.is_empty() {
        return Err(MetricError::TooFew { needed: 1, got: 0 });
    }
    let mut matches = [0usize; 2];
    let mut totals = [0usize; 2];
    let (mut ref_len, mut hyp_len) = (0usize, 0usize);
    for (r, h) in refs.iter().zip(hyps) {
        ref_len += r.len();
        hyp_len += h.len();
        for n in 1..=2 {
            let rc = ngram_counts(r, n);
            let hc = ngram_counts(h, n);
            totals[n - 1] += h.len().saturating_sub(n - 1);
            matches[n - 1] += hc.iter().map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0))).sum::<usize>();
        }
    }
    if matches[0] == 0 || matches[1] == 0 || hyp_len == 0 {
        return Ok(0.0);
    }
    let log_p: f64 = (0..2).map(|i| 0.5 * (matches[i] as f64 / totals[i] as f64).ln()).sum();
    let bp = if hyp_len > ref_len { 1.0 } else { (1.0 - ref_len as f64 / hyp_len as f64).exp() };
    Ok(bp * log_p.exp())
}

/// Corpus BLEU-2 with [`bleu_tokens`] tokenization.
pub fn bleu2(refs: &[String], hyps: &[String]) -> Result<f64, MetricError> {
    let r: Vec<Vec<String>> = refs.iter().map(|s| bleu_tokens(s)).collect();
    let h: Vec<Vec<String>> = hyps.iter().map(|s| bleu_tokens(s)).collect();
    bleu2_tokens(&r, &h)
}

/// SMILES tokens for BLEU over molecules; unlexable strings give no tokens.
pub fn smiles_bleu_tokens(s: &str) -> Vec<String> {
    tokenize_smiles(s).map(|t| t.into_iter().map(|t| t.surface).collect()).unwrap_or_default()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Exact,
    #[default]
    Canonical,
}

impl std::str::FromStr for MatchMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(MatchMode::Exact),
            "canonical" => Ok(MatchMode::Canonical),
            _ => Err(format!("unknown match mode {s:?}")),
        }
    }
}

/// Fraction of items whose first `k` candidates contain the gold answer.
/// Items without any candidate count as rejected misses.
pub fn topk_reaction_accuracy(
    task: TaskKind,
    gold: &[String],
    candidates: &[Vec<String>],
    k: usize,
    mode: MatchMode,
) -> Result<MetricReport, MetricError> {
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    if gold.len() != candidates.len() {
        return Err(MetricError::LengthMismatch(gold.len(), candidates.len()));
    }
    let opts = CanonOptions::default();
    let hits: usize = gold
        .par_iter()
        .zip(candidates)
        .map(|(g, cands)| {
            let top = &cands[..cands.len().min(k)];
            let hit = match mode {
                MatchMode::Exact => top.iter().any(|c| c == g),
                MatchMode::Canonical => match canonicalize(g, &opts) {
                    Ok(cg) => top.iter().any(|c| canonicalize(c, &opts).is_ok_and(|cc| cc == cg)),
                    Err(_) => false,
                },
            };
            hit as usize
        })
        .sum();
    let rejected = candidates.iter().filter(|c| c.is_empty()).count();
    let digest = config_digest(&json!({"metric": "accuracy_at_k", "k": k, "match": mode}));
    let value = ratio(hits, gold.len());
    Ok(MetricReport::new(task, &format!("accuracy@top{k}"), value, gold.len(), rejected, &digest))
}

#[derive(Clone, Debug)]
pub struct GenerationConfig {
    pub k: usize,
    pub p: u32,
    pub radius: usize,
    pub width: usize,
    pub filters: FilterConfig,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig { k: 10_000, p: 1, radius: DEFAULT_RADIUS, width: DEFAULT_WIDTH, filters: FilterConfig::default() }
    }
}

impl GenerationConfig {
    pub fn params(&self) -> Value {
        let f = &self.filters;
        json!({
            "metric": "generation_suite",
            "k": self.k,
            "p": self.p,
            "fingerprint": fingerprint_params(self.radius, self.width),
            "filters": {
                "elements": f.allowed_elements.iter().map(|e| e.symbol()).collect::<Vec<_>>(),
                "neutral": f.require_neutral,
                "max_ring": f.max_ring_size,
                "blacklist": f.blacklist_digest,
                "patterns": f.pattern_blacklist.len(),
            },
            "fcd_substitute": true,
        })
    }

    pub fn digest(&self) -> String {
        config_digest(&self.params())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationSetStats {
    pub n_generated: usize,
    pub n_valid: usize,
    pub n_unique: usize,
    pub k: usize,
    pub valid: f64,
    pub unique_at_k: f64,
    pub novelty: f64,
    pub int_div: f64,
    /// Distributional scores against the test set; `None` without one.
    pub snn: Option<f64>,
    pub frag: Option<f64>,
    pub scaf: Option<f64>,
    pub filters: f64,
    /// Fréchet distance between descriptor-vector Gaussians.
    pub fd_descriptor: Option<f64>,
    /// Always true: `fd_descriptor` stands in for FCD.
    pub fcd_substitute: bool,
    /// No valid generated molecule; the ratios past `valid` are zero.
    pub degenerate: bool,
}

impl GenerationSetStats {
    pub fn reports(&self, digest: &str) -> Vec<MetricReport> {
        let t = TaskKind::MolGeneration;
        let (n, v) = (self.n_generated, self.n_valid);
        let d = self.degenerate;
        let mut out = vec![
            MetricReport::new(t, "valid", self.valid, n, n - v, digest),
            MetricReport::new(t, &format!("unique@{}", self.k), self.unique_at_k, self.k, 0, digest).flagged(d),
            MetricReport::new(t, "novelty", self.novelty, self.n_unique, 0, digest).flagged(d),
            MetricReport::new(t, "int_div", self.int_div, v, 0, digest).flagged(d),
        ];
        for (name, value) in [
            ("snn", self.snn),
            ("frag", self.frag),
            ("scaf", self.scaf),
            ("fd_descriptor(fcd_substitute=true)", self.fd_descriptor),
        ] {
            if let Some(x) = value {
                out.push(MetricReport::new(t, name, x, v, 0, digest).flagged(d));
            }
        }
        out.push(MetricReport::new(t, "filters", self.filters, v, 0, digest).flagged(d));
        out
    }
}

/// A parsed, validated molecule with its canonical form.
#[derive(Clone, Debug)]
pub struct ValidMolecule {
    pub index: usize,
    pub canonical: String,
    pub mol: Molecule,
}

/// Parses and validates each string; valid ones keep their input index.
pub fn valid_molecules(smiles: &[String]) -> Vec<ValidMolecule> {
    smiles
        .par_iter()
        .enumerate()
        .filter_map(|(index, s)| {
            let m = parse_smiles(s).ok()?;
            if !validate(&m).is_empty() {
                return None;
            }
            let mol = normalize(&m).ok()?;
            let canonical = canonical_smiles(&mol).ok()?;
            Some(ValidMolecule { index, canonical, mol })
        })
        .collect()
}

pub fn fingerprints(mols: &[ValidMolecule], radius: usize, width: usize) -> Vec<Fingerprint> {
    mols.par_iter().map(|m| morgan_fingerprint(&m.mol, radius, width)).collect()
}

fn sim(a: &Fingerprint, b: &Fingerprint) -> f64 {
    tanimoto(a, b).expect("fingerprints share a width")
}

/// `1 - mean(T^p)^(1/p)` over all ordered pairs, self-pairs included.
/// Pairs are summed row by row in index order.
pub fn internal_diversity(fps: &[Fingerprint], p: u32) -> f64 {
    let n = fps.len();
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for block in (0..n).collect::<Vec<_>>().chunks(256) {
        let rows: Vec<Vec<f64>> = block
            .par_iter()
            .map(|&i| fps.iter().map(|b| sim(&fps[i], b).powi(p as i32)).collect())
            .collect();
        for row in rows {
            for v in row {
                acc += v;
            }
        }
    }
    let mean = acc / (n * n) as f64;
    1.0 - mean.powf(1.0 / p as f64)
}

/// Mean over `gen` of the best Tanimoto against `reference`.
pub fn nearest_neighbour_similarity(gen: &[Fingerprint], reference: &[Fingerprint]) -> f64 {
    if gen.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let best: Vec<f64> = gen
        .par_iter()
        .map(|g| reference.iter().map(|r| sim(g, r)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut acc = 0.0;
    for b in &best {
        acc += b;
    }
    acc / gen.len() as f64
}

/// Cosine similarity of two count maps; 1 for two empty maps.
pub fn count_cosine(a: &BTreeMap<String, usize>, b: &BTreeMap<String, usize>) -> f64 {
    let na: u128 = a.values().map(|&v| (v as u128).pow(2)).sum();
    let nb: u128 = b.values().map(|&v| (v as u128).pow(2)).sum();
    if na == 0 && nb == 0 {
        return 1.0;
    }
    if na == 0 || nb == 0 {
        return 0.0;
    }
    let dot: u128 = a.iter().filter_map(|(k, &v)| b.get(k).map(|&w| v as u128 * w as u128)).sum();
    (dot as f64 / ((na * nb) as f64).sqrt()).min(1.0)
}

fn fragment_counts(mols: &[ValidMolecule]) -> BTreeMap<String, usize> {
    let maps: Vec<BTreeMap<String, usize>> = mols.par_iter().map(|m| fragment_molecule(&m.mol)).collect();
    let mut out = BTreeMap::new();
    for m in maps {
        for (k, v) in m {
            *out.entry(k).or_insert(0) += v;
        }
    }
    out
}

/// Scaffold multiplicities; acyclic molecules (empty scaffold) are skipped.
fn scaffold_counts(mols: &[ValidMolecule]) -> BTreeMap<String, usize> {
    let scafs: Vec<String> = mols.par_iter().map(|m| scaffold_smiles(&m.mol)).collect();
    let mut out = BTreeMap::new();
    for s in scafs.into_iter().filter(|s| !s.is_empty()) {
        *out.entry(s).or_insert(0) += 1;
    }
    out
}

fn moments(mols: &[ValidMolecule]) -> (DVector<f64>, DMatrix<f64>) {
    let n = mols.len();
    let rows: Vec<[f64; DESCRIPTOR_LEN]> = mols.par_iter().map(|m| descriptor_vector(&m.mol).0).collect();
    let x = DMatrix::from_fn(n, DESCRIPTOR_LEN, |i, j| rows[i][j]);
    let mu = DVector::from_fn(DESCRIPTOR_LEN, |j, _| x.column(j).sum() / n.max(1) as f64);
    let mut cov = DMatrix::zeros(DESCRIPTOR_LEN, DESCRIPTOR_LEN);
    if n > 1 {
        let mut centered = x.clone();
        for j in 0..DESCRIPTOR_LEN {
            centered.column_mut(j).add_scalar_mut(-mu[j]);
        }
        cov = centered.transpose() * &centered / (n - 1) as f64;
    }
    (mu, cov)
}

/// Square root of a symmetric positive semi-definite matrix.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// `|mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2))`, clamped at zero. The
/// trace of the cross term is the nuclear norm of `S1^(1/2) S2^(1/2)`.
pub fn frechet_distance(mu1: &DVector<f64>, s1: &DMatrix<f64>, mu2: &DVector<f64>, s2: &DMatrix<f64>) -> f64 {
    let diff = mu1 - mu2;
    let cross = (sqrtm_psd(s1) * sqrtm_psd(s2)).singular_values().sum();
    (diff.dot(&diff) + s1.trace() + s2.trace() - 2.0 * cross).max(0.0)
}

/// Validity, uniqueness, novelty, diversity and distribution-matching
/// scores of `gen` against `train` and `test`. An empty `test` leaves the
/// distributional fields unset.
pub fn generation_suite(
    gen: &[String],
    train: &[String],
    test: &[String],
    cfg: &GenerationConfig,
) -> Result<GenerationSetStats, MetricError> {
    if cfg.k == 0 {
        return Err(MetricError::ZeroK);
    }
    if cfg.k > gen.len() {
        return Err(MetricError::KTooLarge { k: cfg.k, n: gen.len() });
    }
    let valid = valid_molecules(gen);
    let n_valid = valid.len();
    let unique: BTreeSet<&str> = valid.iter().map(|v| v.canonical.as_str()).collect();
    let first_k: HashSet<&str> = valid.iter().take(cfg.k).map(|v| v.canonical.as_str()).collect();
    let mut stats = GenerationSetStats {
        n_generated: gen.len(),
        n_valid,
        n_unique: unique.len(),
        k: cfg.k,
        valid: ratio(n_valid, gen.len()),
        unique_at_k: first_k.len() as f64 / cfg.k as f64,
        novelty: 0.0,
        int_div: 0.0,
        snn: None,
        frag: None,
        scaf: None,
        filters: 0.0,
        fd_descriptor: None,
        fcd_substitute: true,
        degenerate: n_valid == 0,
    };
    if n_valid == 0 {
        return Ok(stats);
    }
    let train_set: HashSet<String> = valid_molecules(train).into_iter().map(|v| v.canonical).collect();
    stats.novelty = ratio(unique.iter().filter(|c| !train_set.contains(**c)).count(), unique.len());

    let gen_fp = fingerprints(&valid, cfg.radius, cfg.width);
    stats.int_div = internal_diversity(&gen_fp, cfg.p);
    let passed = valid.par_iter().filter(|v| passes_filters(&v.mol, &cfg.filters).passed).count();
    stats.filters = ratio(passed, n_valid);
    let test_valid = valid_molecules(test);
    if !test_valid.is_empty() {
        let test_fp = fingerprints(&test_valid, cfg.radius, cfg.width);
        stats.snn = Some(nearest_neighbour_similarity(&gen_fp, &test_fp));
        stats.frag = Some(count_cosine(&fragment_counts(&valid), &fragment_counts(&test_valid)));
        stats.scaf = Some(count_cosine(&scaffold_counts(&valid), &scaffold_counts(&test_valid)));
        let (mg, sg) = moments(&valid);
        let (mt, st) = moments(&test_valid);
        stats.fd_descriptor = Some(frechet_distance(&mg, &sg, &mt, &st));
    }
    Ok(stats)
}

/// Options for [`score_predictions`].
#[derive(Clone, Debug)]
pub struct ScoreOptions {
    /// Template the outputs were produced with; supplies markers, entity
    /// type and label set.
    pub template: Option<PromptTemplate>,
    /// Overrides the label set otherwise taken from the template or gold.
    pub labels: Option<Vec<String>>,
    pub k: usize,
    pub match_mode: MatchMode,
    pub decode_mode: DecodeMode,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions { template: None, labels: None, k: 1, match_mode: MatchMode::Canonical, decode_mode: DecodeMode::Aligned }
    }
}

/// One prediction line: `{"id", "output"}` or `{"id", "outputs": [...]}`
/// with candidates ranked best first.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
pub struct PredictionRecord {
    pub id: Option<String>,
    pub output: Option<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

impl PredictionRecord {
    pub fn into_outputs(self) -> Vec<String> {
        let mut outs: Vec<String> = self.output.into_iter().collect();
        outs.extend(self.outputs);
        outs
    }
}

/// Checks counts, ids (when given) and that every gold record has `task`.
/// Indices in errors are 1-based.
pub fn align_predictions(task: TaskKind, golds: &[TaskInstance], preds: &[PredictionRecord]) -> Result<(), MetricError> {
    if golds.len() != preds.len() {
        return Err(MetricError::LengthMismatch(golds.len(), preds.len()));
    }
    for (i, (g, p)) in golds.iter().zip(preds).enumerate() {
        if let Some(id) = p.id.as_ref().filter(|id| **id != g.id) {
            return Err(MetricError::IdMismatch { index: i + 1, gold: g.id.clone(), pred: id.clone() });
        }
        if g.task != task {
            return Err(MetricError::TaskMismatch { index: i + 1, found: g.task, expected: task });
        }
    }
    Ok(())
}

/// The template to score with when none is named: the only candidate for
/// the first gold record, if exactly one exists.
pub fn sole_template(set: &TemplateSet, golds: &[TaskInstance]) -> Option<PromptTemplate> {
    golds.first().and_then(|g| match set.candidates(g)[..] {
        [only] => Some(only.clone()),
        _ => None,
    })
}

/// Gold label string of an instance (`target` as text).
pub fn gold_label(inst: &TaskInstance) -> Option<String> {
    match inst.fields.get("target")? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Gold real value of an instance; strings are parsed.
pub fn gold_real(inst: &TaskInstance) -> Option<f64> {
    match inst.fields.get("target")? {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => parse_numeric(s),
        _ => None,
    }
}

fn gold_all<T>(golds: &[TaskInstance], f: impl Fn(&TaskInstance) -> Option<T>) -> Result<Vec<T>, MetricError> {
    golds.iter().map(|g| f(g).ok_or_else(|| MetricError::BadGold(g.id.clone()))).collect()
}

fn first_output(o: &[String]) -> &str {
    o.first().map_or("", String::as_str)
}

/// Scores ranked outputs (one list per gold record, same order) with the
/// task's metric. All records must share one task.
pub fn score_predictions(
    golds: &[TaskInstance],
    outputs: &[Vec<String>],
    opts: &ScoreOptions,
) -> Result<Vec<MetricReport>, MetricError> {
    if golds.len() != outputs.len() {
        return Err(MetricError::LengthMismatch(golds.len(), outputs.len()));
    }
    let Some(task) = golds.first().map(|g| g.task) else {
        return Err(MetricError::TooFew { needed: 1, got: 0 });
    };
    if let Some(g) = golds.iter().find(|g| g.task != task) {
        return Err(MetricError::Config(format!("record {} is {}, expected {task}", g.id, g.task)));
    }
    match task {
        TaskKind::Ner | TaskKind::Pico => score_spans(task, golds, outputs, opts),
        TaskKind::Entailment
        | TaskKind::RelationExtraction
        | TaskKind::DocClassification
        | TaskKind::QaYesno
        | TaskKind::QaMultichoice
        | TaskKind::PropClassification => score_labels(task, golds, outputs, opts),
        TaskKind::SentenceSimilarity => {
            let gold = gold_all(golds, gold_real)?;
            let pred: Vec<Option<f64>> = outputs.iter().map(|o| parse_numeric(first_output(o))).collect();
            Ok(vec![pearson(&gold, &pred)?])
        }
        TaskKind::PropRegression => {
            let gold = gold_all(golds, gold_real)?;
            let pred: Vec<Option<f64>> = outputs.iter().map(|o| parse_numeric(first_output(o))).collect();
            let s = regression_scores(&gold, &pred)?;
            let digest = config_digest(&json!({"metric": "regression", "reject": "gold_mean"}));
            Ok(vec![
                MetricReport::new(task, "r2", s.r2.unwrap_or(0.0), s.support, s.rejected, &digest).flagged(s.r2.is_none()),
                MetricReport::new(task, "rmse", s.rmse, s.support, s.rejected, &digest),
            ])
        }
        TaskKind::QaOpen | TaskKind::MolToText => {
            let refs = gold_all(golds, gold_label)?;
            let hyps: Vec<String> = outputs.iter().map(|o| first_output(o).to_string()).collect();
            let rejected = outputs.iter().filter(|o| o.is_empty()).count();
            let digest = config_digest(&bleu_params("words"));
            Ok(vec![MetricReport::new(task, "bleu2", bleu2(&refs, &hyps)?, refs.len(), rejected, &digest)])
        }
        TaskKind::TextToMol => {
            let refs: Vec<Vec<String>> = gold_all(golds, gold_label)?.iter().map(|s| smiles_bleu_tokens(s)).collect();
            let extracted: Vec<Option<String>> = outputs.iter().map(|o| extract_smiles(first_output(o))).collect();
            let rejected = extracted.iter().filter(|e| e.is_none()).count();
            let hyps: Vec<Vec<String>> =
                extracted.iter().map(|e| e.as_deref().map(smiles_bleu_tokens).unwrap_or_default()).collect();
            let digest = config_digest(&bleu_params("smiles"));
            Ok(vec![MetricReport::new(task, "bleu2", bleu2_tokens(&refs, &hyps)?, refs.len(), rejected, &digest)])
        }
        TaskKind::ForwardReaction | TaskKind::ReagentPrediction | TaskKind::Retrosynthesis => {
            let gold = gold_all(golds, gold_label)?;
            let cands: Vec<Vec<String>> =
                outputs.iter().map(|o| o.iter().filter_map(|s| extract_smiles(s)).collect()).collect();
            Ok(vec![topk_reaction_accuracy(task, &gold, &cands, opts.k, opts.match_mode)?])
        }
        TaskKind::MolGeneration => Err(MetricError::Config(
            "mol_generation is scored over whole sets; use generation_suite".into(),
        )),
    }
}

fn score_spans(
    task: TaskKind,
    golds: &[TaskInstance],
    outputs: &[Vec<String>],
    opts: &ScoreOptions,
) -> Result<Vec<MetricReport>, MetricError> {
    let tmpl = opts.template.as_ref().ok_or_else(|| MetricError::Config("span scoring needs a template".into()))?;
    let markers = tmpl.markers.as_ref().ok_or_else(|| MetricError::Config(format!("template {} has no markers", tmpl.id)))?;
    let kind = tmpl.entity.clone().unwrap_or_default();
    let mut gold_docs = Vec::with_capacity(golds.len());
    let mut pred_docs = Vec::with_capacity(golds.len());
    let mut warned = 0;
    for (g, o) in golds.iter().zip(outputs) {
        let text = g.span_text().ok_or_else(|| MetricError::BadGold(g.id.clone()))?;
        let gold: Vec<Span> = g
            .spans
            .iter()
            .filter(|s| tmpl.entity.as_ref().is_none_or(|e| *e == s.kind))
            .map(|s| Span { start: s.start, end: s.end, kind: kind.clone() })
            .collect();
        let d = decode_spans(first_output(o), text, markers, opts.decode_mode);
        warned += (d.warnings > 0) as usize;
        let pred: Vec<Span> = d.spans.into_iter().map(|(start, end)| Span { start, end, kind: kind.clone() }).collect();
        gold_docs.push((g.id.clone(), text, gold));
        pred_docs.push(pred);
    }
    let mode = match opts.decode_mode {
        DecodeMode::Aligned => "aligned",
        DecodeMode::Strict => "strict",
    };
    let mut report = if task == TaskKind::Ner {
        let gold: Vec<(String, Vec<Span>)> = gold_docs.iter().map(|(id, _, s)| (id.clone(), s.clone())).collect();
        let pred: Vec<(String, Vec<Span>)> = gold_docs.iter().zip(pred_docs).map(|((id, _, _), p)| (id.clone(), p)).collect();
        entity_f1(&gold, &pred)?
    } else {
        let to_ranges = |s: &[Span]| s.iter().map(|s| (s.start, s.end)).collect::<Vec<_>>();
        let gold: Vec<Vec<bool>> = gold_docs.iter().map(|(_, t, s)| token_labels(t, &to_ranges(s))).collect();
        let pred: Vec<Vec<bool>> = gold_docs.iter().zip(&pred_docs).map(|((_, t, _), p)| token_labels(t, &to_ranges(p))).collect();
        word_f1(&gold, &pred)?
    };
    report.task = task;
    report.rejected = warned;
    report.config_digest = config_digest(&json!({"metric": report.metric_name, "decode": mode, "markers": [markers.open, markers.close]}));
    Ok(vec![report])
}

fn score_labels(
    task: TaskKind,
    golds: &[TaskInstance],
    outputs: &[Vec<String>],
    opts: &ScoreOptions,
) -> Result<Vec<MetricReport>, MetricError> {
    let gold = gold_all(golds, gold_label)?;
    let labels: Vec<String> = if let Some(l) = &opts.labels {
        l.clone()
    } else if task == TaskKind::QaMultichoice {
        let n = golds
            .iter()
            .filter_map(|g| g.fields.get("choices").and_then(Value::as_array).map(Vec::len))
            .max()
            .unwrap_or(26);
        (0..n.min(26)).map(|i| ((b'A' + i as u8) as char).to_string()).collect()
    } else if let Some(t) = opts.template.as_ref().filter(|t| !t.labels.is_empty()) {
        t.labels.clone()
    } else {
        gold.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    };
    let pred: Vec<Option<String>> = outputs.iter().map(|o| parse_label(first_output(o), task, &labels)).collect();
    let positive = positive_label(&labels);
    let s = classification_scores(&gold, &pred, positive)?;
    let digest = config_digest(&json!({"metric": "classification", "labels": labels, "positive": positive}));
    let report = |name: &str, v: f64| MetricReport::new(task, name, v, s.support, s.rejected, &digest);
    Ok(match task {
        TaskKind::PropClassification => vec![report("balanced_accuracy", s.balanced_accuracy), report("accuracy", s.accuracy)],
        TaskKind::RelationExtraction | TaskKind::DocClassification => {
            let f1 = match s.positive_f1 {
                Some(f) => report("positive_f1", f),
                None => report("macro_f1", s.macro_f1),
            };
            vec![f1, report("accuracy", s.accuracy)]
        }
        _ => vec![report("accuracy", s.accuracy)],
    })
}
