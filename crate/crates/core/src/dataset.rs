//! Indexed, memory-mapped access to newline-delimited corpora and seeded
//! multi-task mixtures.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;

use memmap2::Mmap;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::prompt::{format_instance, FormattedPair, TaskInstance, TaskKind, TemplateSet};
use crate::tokenizer::{detect_smiles_spans, tokenize_mixed, TextTokenizer, UnknownPolicy, Vocabulary};

pub const NIDX_MAGIC: [u8; 4] = *b"NIDX";
pub const NIDX_VERSION: u16 = 1;
pub const DEFAULT_PREFETCH: usize = 1024;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: malformed index: {message}")]
    BadIndex { path: PathBuf, message: String },
    #[error("{path}: index digest does not match the data file")]
    DigestMismatch { path: PathBuf },
    #[error("record {index} out of range ({count} records)")]
    OutOfRange { index: usize, count: usize },
    #[error("mixture: {0}")]
    Mixture(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Path of the sidecar index for `data`.
pub fn index_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".nidx");
    PathBuf::from(s)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetIndex {
    pub version: u16,
    /// Record start offsets; record `i` ends before the newline preceding
    /// `offsets[i + 1]`, the last one at end of file.
    pub offsets: Vec<u64>,
    pub source_digest: [u8; 32],
}

impl DatasetIndex {
    pub fn record_count(&self) -> usize {
        self.offsets.len()
    }

    /// Record starts and content digest of `bytes`.
    pub fn scan(bytes: &[u8]) -> DatasetIndex {
        let mut offsets = Vec::new();
        let mut start = 0;
        while start < bytes.len() {
            offsets.push(start as u64);
            start = match bytes[start..].iter().position(|&b| b == b'\n') {
                Some(p) => start + p + 1,
                None => bytes.len(),
            };
        }
        DatasetIndex { version: NIDX_VERSION, offsets, source_digest: Sha256::digest(bytes).into() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 2 + 8 + 8 * self.offsets.len() + 32);
        out.extend_from_slice(&NIDX_MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(self.offsets.len() as u64).to_le_bytes());
        for o in &self.offsets {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(&self.source_digest);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<DatasetIndex, String> {
        if b.len() < 14 || b[..4] != NIDX_MAGIC {
            return Err("missing NIDX header".into());
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != NIDX_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let count = u64::from_le_bytes(b[6..14].try_into().unwrap()) as usize;
        let expected = count.checked_mul(8).and_then(|n| n.checked_add(14 + 32));
        if expected != Some(b.len()) {
            return Err(format!("length {} does not fit {count} records", b.len()));
        }
        let offsets: Vec<u64> =
            b[14..14 + 8 * count].chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        if offsets.first().is_some_and(|&o| o != 0) || offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err("offsets are not strictly increasing from 0".into());
        }
        let source_digest = b[14 + 8 * count..].try_into().unwrap();
        Ok(DatasetIndex { version, offsets, source_digest })
    }

    pub fn read(path: &Path) -> Result<DatasetIndex, DatasetError> {
        let mut buf = Vec::new();
        File::open(path).and_then(|mut f| f.read_to_end(&mut buf)).map_err(io_err(path))?;
        DatasetIndex::from_bytes(&buf).map_err(|message| DatasetError::BadIndex { path: path.into(), message })
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        let f = File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(f);
        w.write_all(&self.to_bytes()).and_then(|_| w.flush()).map_err(io_err(path))
    }
}

fn map_file(path: &Path) -> Result<Option<Mmap>, DatasetError> {
    let f = File::open(path).map_err(io_err(path))?;
    if f.metadata().map_err(io_err(path))?.len() == 0 {
        return Ok(None);
    }
    // SAFETY: the mapping is read-only; a file truncated under us would be
    // caught by the digest on the next open, not by this process.
    unsafe { Mmap::map(&f) }.map(Some).map_err(io_err(path))
}

/// Scans `data` once and writes `<data>.nidx` next to it.
pub fn build_index(data: &Path) -> Result<DatasetIndex, DatasetError> {
    let map = map_file(data)?;
    let idx = DatasetIndex::scan(map.as_deref().unwrap_or(&[]));
    idx.write(&index_path(data))?;
    Ok(idx)
}

/// A data file opened through its verified sidecar index. Reads are
/// lock-free and may come from many threads.
#[derive(Debug)]
pub struct Dataset {
    path: PathBuf,
    map: Option<Mmap>,
    index: DatasetIndex,
}

impl Dataset {
    /// Opens `data` with `<data>.nidx`, failing if the index is stale.
    pub fn open(data: &Path) -> Result<Dataset, DatasetError> {
        let index = DatasetIndex::read(&index_path(data))?;
        let map = map_file(data)?;
        let bytes = map.as_deref().unwrap_or(&[]);
        let digest: [u8; 32] = Sha256::digest(bytes).into();
        if digest != index.source_digest || index.offsets.last().is_some_and(|&o| o as usize >= bytes.len()) {
            return Err(DatasetError::DigestMismatch { path: data.into() });
        }
        Ok(Dataset { path: data.into(), map, index })
    }

    /// Opens with an existing index, building one when none is present.
    pub fn open_or_build(data: &Path) -> Result<Dataset, DatasetError> {
        if !index_path(data).exists() {
            build_index(data)?;
        }
        Dataset::open(data)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn index(&self) -> &DatasetIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.record_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn bytes(&self) -> &[u8] {
        self.map.as_deref().unwrap_or(&[])
    }

    /// Record `i` without its trailing newline.
    pub fn get_record(&self, i: usize) -> Result<&[u8], DatasetError> {
        let offs = &self.index.offsets;
        let Some(&start) = offs.get(i) else {
            return Err(DatasetError::OutOfRange { index: i, count: offs.len() });
        };
        let bytes = self.bytes();
        let mut end = offs.get(i + 1).map_or(bytes.len(), |&e| e as usize);
        if end > start as usize && bytes[end - 1] == b'\n' {
            end -= 1;
        }
        Ok(&bytes[start as usize..end])
    }

    /// Sequential pass over all records.
    pub fn records(&self) -> impl Iterator<Item = &[u8]> + '_ {
        (0..self.len()).map(move |i| self.get_record(i).expect("index in range"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub path: PathBuf,
    pub task: TaskKind,
    pub weight: f64,
}

fn default_temperature() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub components: Vec<MixtureComponent>,
    pub seed: u64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

impl MixtureSpec {
    /// Reads a JSON spec; relative component paths resolve against the
    /// spec file's directory.
    pub fn load(path: &Path) -> Result<MixtureSpec, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut spec: MixtureSpec =
            serde_json::from_str(&text).map_err(|e| DatasetError::Mixture(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for c in &mut spec.components {
            if c.path.is_relative() {
                c.path = base.join(&c.path);
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.components.is_empty() {
            return Err(DatasetError::Mixture("no components".into()));
        }
        if let Some(c) = self.components.iter().find(|c| !(c.weight > 0.0 && c.weight.is_finite())) {
            return Err(DatasetError::Mixture(format!("weight of {} must be positive", c.path.display())));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(DatasetError::Mixture("temperature must be positive".into()));
        }
        Ok(())
    }

    /// Component probabilities, proportional to `weight^(1/temperature)`.
    pub fn probabilities(&self) -> Vec<f64> {
        let logs: Vec<f64> = self.components.iter().map(|c| c.weight.ln() / self.temperature).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    }
}

/// The datasets of a [`MixtureSpec`], opened and verified.
#[derive(Debug)]
pub struct Mixture {
    pub spec: MixtureSpec,
    pub datasets: Vec<Dataset>,
}

impl Mixture {
    pub fn open(spec: MixtureSpec) -> Result<Mixture, DatasetError> {
        spec.validate()?;
        let datasets = spec.components.iter().map(|c| Dataset::open(&c.path)).collect::<Result<Vec<_>, _>>()?;
        if let Some(d) = datasets.iter().find(|d| d.is_empty()) {
            return Err(DatasetError::Mixture(format!("{} has no records", d.path.display())));
        }
        Ok(Mixture { spec, datasets })
    }

    /// `n` seeded draws of (component, record), with replacement.
    pub fn sample(&self, n: usize) -> MixtureSampler {
        MixtureSampler::new(&self.spec, self.datasets.iter().map(Dataset::len).collect(), n)
    }

    pub fn record(&self, component: usize, record: usize) -> Result<&[u8], DatasetError> {
        self.datasets[component].get_record(record)
    }
}

/// Iterator of seeded mixture draws; depends only on the mixture spec, the record
/// counts and `n`.
#[derive(Clone, Debug)]
pub struct MixtureSampler {
    rng: ChaCha8Rng,
    pick: WeightedIndex<f64>,
    counts: Vec<usize>,
    remaining: usize,
}

impl MixtureSampler {
    pub fn new(spec: &MixtureSpec, counts: Vec<usize>, n: usize) -> MixtureSampler {
        assert_eq!(counts.len(), spec.components.len());
        MixtureSampler {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            pick: WeightedIndex::new(spec.probabilities()).expect("validated weights"),
            counts,
            remaining: n,
        }
    }
}

impl Iterator for MixtureSampler {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let c = self.pick.sample(&mut self.rng);
        Some((c, self.rng.gen_range(0..self.counts[c])))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

/// `n` sampled draws for a spec, opening its datasets.
pub fn sample_mixture(spec: &MixtureSpec, n: usize) -> Result<Vec<(usize, usize)>, DatasetError> {
    Ok(Mixture::open(spec.clone())?.sample(n).collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedPair {
    pub component: usize,
    pub record: usize,
    pub pair: FormattedPair,
    pub input_ids: Vec<u32>,
    pub target_ids: Vec<u32>,
}

#[derive(Clone, Copy, Debug)]
pub struct StreamOptions {
    pub prefetch: usize,
    pub policy: UnknownPolicy,
}

impl Default for StreamOptions {
    fn default() -> Self {
        StreamOptions { prefetch: DEFAULT_PREFETCH, policy: UnknownPolicy::Substitute }
    }
}

#[derive(Debug, Default)]
pub struct StreamCounters {
    /// Lines that were not UTF-8 InstanceRecord JSON.
    pub malformed: AtomicUsize,
    /// Records no template could render or whose task disagreed with the
    /// component.
    pub unformattable: AtomicUsize,
    /// Records whose SMILES could not be tokenized under the policy.
    pub untokenizable: AtomicUsize,
}

impl StreamCounters {
    pub fn skipped(&self) -> usize {
        self.malformed.load(Ordering::Relaxed)
            + self.unformattable.load(Ordering::Relaxed)
            + self.untokenizable.load(Ordering::Relaxed)
    }
}

/// Formatted, tokenized pairs in sampling order, produced by a background
/// thread through a bounded queue.
pub struct FormattedStream {
    rx: Receiver<TokenizedPair>,
    counters: Arc<StreamCounters>,
    worker: Option<JoinHandle<()>>,
}

impl FormattedStream {
    pub fn counters(&self) -> &StreamCounters {
        &self.counters
    }
}

impl Iterator for FormattedStream {
    type Item = TokenizedPair;

    fn next(&mut self) -> Option<TokenizedPair> {
        match self.rx.recv() {
            Ok(item) => Some(item),
            Err(_) => {
                if let Some(w) = self.worker.take() {
                    if let Err(panic) = w.join() {
                        std::panic::resume_unwind(panic);
                    }
                }
                None
            }
        }
    }
}

fn encode_text(
    text: &str,
    text_tok: &dyn TextTokenizer,
    vocab: &Vocabulary,
    policy: UnknownPolicy,
) -> Option<Vec<u32>> {
    tokenize_mixed(&detect_smiles_spans(text), text_tok, vocab, policy).ok().map(|e| e.ids)
}

fn process(
    mixture: &Mixture,
    templates: &TemplateSet,
    vocab: &Vocabulary,
    text_tok: &dyn TextTokenizer,
    policy: UnknownPolicy,
    counters: &StreamCounters,
    (component, record): (usize, usize),
) -> Option<TokenizedPair> {
    let bytes = mixture.record(component, record).expect("sampled index in range");
    let Ok(inst) = std::str::from_utf8(bytes).map_err(|_| ()).and_then(|s| serde_json::from_str::<TaskInstance>(s).map_err(|_| ())) else {
        counters.malformed.fetch_add(1, Ordering::Relaxed);
        return None;
    };
    let pair = (inst.task == mixture.spec.components[component].task)
        .then(|| templates.select(&inst, mixture.spec.seed))
        .flatten()
        .and_then(|t| format_instance(&inst, t).ok());
    let Some(pair) = pair else {
        counters.unformattable.fetch_add(1, Ordering::Relaxed);
        return None;
    };
    match (encode_text(&pair.input, text_tok, vocab, policy), encode_text(&pair.target, text_tok, vocab, policy)) {
        (Some(input_ids), Some(target_ids)) => Some(TokenizedPair { component, record, pair, input_ids, target_ids }),
        _ => {
            counters.untokenizable.fetch_add(1, Ordering::Relaxed);
            None
        }
    }
}

/// Samples `n` records, renders each with a seeded template choice and
/// tokenizes input and target. Skipped records are tallied in
/// [`FormattedStream::counters`]; the rest arrive in sampling order.
pub fn stream_formatted<T>(
    mixture: Arc<Mixture>,
    templates: Arc<TemplateSet>,
    vocab: Arc<Vocabulary>,
    text_tok: T,
    n: usize,
    opts: StreamOptions,
) -> FormattedStream
where
    T: TextTokenizer + Send + 'static,
{
    let (tx, rx) = sync_channel(opts.prefetch.max(1));
    let counters = Arc::new(StreamCounters::default());
    let c = Arc::clone(&counters);
    let worker = std::thread::spawn(move || {
        for draw in mixture.sample(n) {
            if let Some(item) = process(&mixture, &templates, &vocab, &text_tok, opts.policy, &c, draw) {
                if tx.send(item).is_err() {
                    return;
                }
            }
        }
    });
    FormattedStream { rx, counters, worker: Some(worker) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &[u8]) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn index_and_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.txt", b"a\nb\nc\n");
        let idx = build_index(&p).unwrap();
        assert_eq!(idx.offsets, [0, 2, 4]);
        let before = std::fs::read(index_path(&p)).unwrap();
        build_index(&p).unwrap();
        assert_eq!(std::fs::read(index_path(&p)).unwrap(), before);
        let d = Dataset::open(&p).unwrap();
        assert_eq!(d.get_record(1).unwrap(), b"b");
        assert!(matches!(d.get_record(3), Err(DatasetError::OutOfRange { index: 3, count: 3 })));

        let p = write(dir.path(), "b.txt", b"x\n\ny");
        build_index(&p).unwrap();
        let d = Dataset::open(&p).unwrap();
        let recs: Vec<&[u8]> = d.records().collect();
        assert_eq!(recs, [&b"x"[..], b"", b"y"]);

        let p = write(dir.path(), "empty.txt", b"");
        assert_eq!(build_index(&p).unwrap().record_count(), 0);
        assert!(Dataset::open(&p).unwrap().is_empty());
    }

    #[test]
    fn stale_index_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.txt", b"a\nb\n");
        build_index(&p).unwrap();
        std::fs::write(&p, b"a\nc\n").unwrap();
        assert!(matches!(Dataset::open(&p), Err(DatasetError::DigestMismatch { .. })));
        std::fs::write(index_path(&p), b"NIDX\x02\x00").unwrap();
        assert!(matches!(Dataset::open(&p), Err(DatasetError::BadIndex { .. })));
    }

    #[test]
    fn sidecar_layout() {
        let idx = DatasetIndex::scan(b"ab\nc\n");
        let b = idx.to_bytes();
        assert_eq!(&b[..4], b"NIDX");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(u64::from_le_bytes(b[6..14].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[22..30].try_into().unwrap()), 3);
        assert_eq!(b.len(), 14 + 16 + 32);
        assert_eq!(DatasetIndex::from_bytes(&b).unwrap(), idx);
    }

    fn spec(weights: &[f64], temperature: f64) -> MixtureSpec {
        MixtureSpec {
            components: weights
                .iter()
                .map(|&w| MixtureComponent { path: "x".into(), task: TaskKind::QaOpen, weight: w })
                .collect(),
            seed: 7,
            temperature,
        }
    }

    #[test]
    fn mixture_probabilities() {
        let p = spec(&[1.0, 3.0], 1.0).probabilities();
        assert!((p[1] - 0.75).abs() < 1e-12);
        let p = spec(&[1.0, 3.0, 10.0], 1e6).probabilities();
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-3));
        assert!(spec(&[], 1.0).validate().is_err());
        assert!(spec(&[0.0], 1.0).validate().is_err());
        assert!(spec(&[1.0], 0.0).validate().is_err());
    }

    #[test]
    fn sampler_is_seeded() {
        let s = spec(&[1.0, 3.0], 1.0);
        let a: Vec<_> = MixtureSampler::new(&s, vec![5, 9], 4000).collect();
        let b: Vec<_> = MixtureSampler::new(&s, vec![5, 9], 4000).collect();
        assert_eq!(a, b);
        let frac = a.iter().filter(|d| d.0 == 1).count() as f64 / 4000.0;
        assert!((frac - 0.75).abs() < 0.02, "{frac}");
        assert!(a.iter().all(|&(c, r)| r < [5, 9][c]));
        let one: Vec<_> = MixtureSampler::new(&spec(&[2.0], 1.0), vec![3], 50).collect();
        assert!(one.iter().all(|d| d.0 == 0));
    }
}
