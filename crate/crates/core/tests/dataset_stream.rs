use std::path::{Path, PathBuf};
use std::sync::Arc;

use chemtext::dataset::{
    build_index, stream_formatted, Dataset, DatasetError, Mixture, MixtureComponent, MixtureSpec, StreamOptions,
    TokenizedPair,
};
use chemtext::prompt::{TaskKind, TemplateSet};
use chemtext::tokenizer::{detect_smiles_spans, detokenize, SegmentKind, Vocabulary, WhitespaceTokenizer};
use proptest::prelude::*;
use serde_json::json;

fn write(dir: &Path, name: &str, body: &[u8]) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn corpus() -> Vec<&'static str> {
    include_str!("../data/corpus_1k.smi").lines().collect()
}

fn m2t_lines(n: usize) -> String {
    corpus()
        .iter()
        .take(n)
        .enumerate()
        .map(|(i, s)| {
            json!({"task": "mol_to_text", "id": format!("m{i}"), "fields": {"smiles": s, "target": format!("Molecule {i}.")}})
                .to_string()
                + "\n"
        })
        .collect()
}

fn vocab_for(lines: &str) -> Vocabulary {
    let mut words: Vec<String> = Vec::new();
    let set = TemplateSet::bundled();
    for t in set.templates() {
        words.extend(t.pattern.split_whitespace().map(str::to_string));
    }
    words.extend(lines.split_whitespace().map(str::to_string));
    words.extend((0..=255u8).map(|b| format!("<0x{b:02X}>")));
    words.sort();
    words.dedup();
    let base = Vocabulary::with_specials(words).unwrap();
    let (v, _, _) = chemtext::tokenizer::extend_vocabulary(&base, corpus());
    v
}

fn spec(parts: &[(&Path, TaskKind, f64)], seed: u64) -> MixtureSpec {
    MixtureSpec {
        components: parts
            .iter()
            .map(|(p, task, weight)| MixtureComponent { path: p.to_path_buf(), task: *task, weight: *weight })
            .collect(),
        seed,
        temperature: 1.0,
    }
}

fn collect(mix: &Arc<Mixture>, vocab: &Arc<Vocabulary>, n: usize, prefetch: usize) -> Vec<TokenizedPair> {
    let opts = StreamOptions { prefetch, ..StreamOptions::default() };
    stream_formatted(Arc::clone(mix), Arc::new(TemplateSet::bundled()), Arc::clone(vocab), WhitespaceTokenizer, n, opts)
        .collect()
}

#[test]
fn stream_is_independent_of_prefetch() {
    let dir = tempfile::tempdir().unwrap();
    let lines = m2t_lines(200);
    let p = write(dir.path(), "m2t.jsonl", lines.as_bytes());
    build_index(&p).unwrap();
    let mix = Arc::new(Mixture::open(spec(&[(&p, TaskKind::MolToText, 1.0)], 9)).unwrap());
    let vocab = Arc::new(vocab_for(&lines));
    let a = collect(&mix, &vocab, 300, 1);
    let b = collect(&mix, &vocab, 300, 1024);
    assert_eq!(a.len(), 300);
    assert_eq!(a, b);
    assert!(collect(&mix, &vocab, 0, 4).is_empty());
}

#[test]
fn smiles_segments_survive_the_stream() {
    let dir = tempfile::tempdir().unwrap();
    let lines = m2t_lines(1000);
    let p = write(dir.path(), "m2t.jsonl", lines.as_bytes());
    build_index(&p).unwrap();
    let mix = Arc::new(Mixture::open(spec(&[(&p, TaskKind::MolToText, 1.0)], 1)).unwrap());
    let vocab = Arc::new(vocab_for(&lines));
    let smiles: Vec<&str> = corpus();
    for item in collect(&mix, &vocab, 1000, 64) {
        let expected: Vec<String> = detect_smiles_spans(&item.pair.input)
            .into_iter()
            .filter(|s| s.kind == SegmentKind::Smiles)
            .map(|s| s.content)
            .collect();
        assert!(expected.contains(&smiles[item.record].to_string()), "{}", item.pair.input);
        let back: Vec<String> = detokenize(&item.input_ids, &vocab, &WhitespaceTokenizer)
            .into_iter()
            .filter(|s| s.kind == SegmentKind::Smiles)
            .map(|s| s.content)
            .collect();
        assert_eq!(back, expected);
        assert!(!item.input_ids.contains(&vocab.unk_id()));
    }
}

#[test]
fn bad_records_are_counted_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = m2t_lines(3);
    lines.push_str("not json\n");
    lines.push_str(&json!({"task": "ner", "id": "x", "fields": {"text": "t"}}).to_string());
    lines.push('\n');
    let p = write(dir.path(), "mixed.jsonl", lines.as_bytes());
    build_index(&p).unwrap();
    let mix = Arc::new(Mixture::open(spec(&[(&p, TaskKind::MolToText, 1.0)], 4)).unwrap());
    let vocab = Arc::new(vocab_for(&lines));
    let mut stream = stream_formatted(
        Arc::clone(&mix),
        Arc::new(TemplateSet::bundled()),
        vocab,
        WhitespaceTokenizer,
        200,
        StreamOptions::default(),
    );
    let got = stream.by_ref().count();
    let c = stream.counters();
    let malformed = c.malformed.load(std::sync::atomic::Ordering::Relaxed);
    let unformattable = c.unformattable.load(std::sync::atomic::Ordering::Relaxed);
    let draws: Vec<(usize, usize)> = mix.sample(200).collect();
    assert_eq!(malformed, draws.iter().filter(|d| d.1 == 3).count());
    assert_eq!(unformattable, draws.iter().filter(|d| d.1 == 4).count());
    assert_eq!(got + c.skipped(), 200);
}

#[test]
fn mixture_fractions_track_weights() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", b"a0\na1\n");
    let b = write(dir.path(), "b.txt", b"b0\n");
    build_index(&a).unwrap();
    build_index(&b).unwrap();
    let mut s = spec(&[(&a, TaskKind::QaOpen, 3.0), (&b, TaskKind::QaOpen, 1.0)], 77);
    let mix = Mixture::open(s.clone()).unwrap();
    let n = 100_000;
    let first = mix.sample(n).filter(|d| d.0 == 0).count() as f64 / n as f64;
    assert!((first - 0.75).abs() < 0.02, "{first}");
    s.temperature = 1e6;
    let p = s.probabilities();
    assert!((p[0] - 0.5).abs() < 1e-5);
    s.temperature = 0.0;
    assert!(matches!(Mixture::open(s), Err(DatasetError::Mixture(_))));
}

#[test]
fn empty_component_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let e = write(dir.path(), "e.txt", b"");
    build_index(&e).unwrap();
    assert!(Mixture::open(spec(&[(&e, TaskKind::QaOpen, 1.0)], 0)).is_err());
}

#[test]
fn stale_index_after_edit() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.txt", b"one\ntwo\n");
    build_index(&p).unwrap();
    std::fs::write(&p, b"one\ntwo\nthree\n").unwrap();
    assert!(matches!(Dataset::open(&p), Err(DatasetError::DigestMismatch { .. })));
    assert!(Dataset::open_or_build(&p).is_err());
    build_index(&p).unwrap();
    assert_eq!(Dataset::open(&p).unwrap().len(), 3);
}

fn oracle(bytes: &[u8]) -> Vec<&[u8]> {
    if bytes.is_empty() {
        return Vec::new();
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    body.split(|&b| b == b'\n').collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn records_partition_the_file(lines in proptest::collection::vec("[a-z ]{0,6}", 0..40), trailing in any::<bool>()) {
        let mut body = lines.join("\n");
        if trailing && !lines.is_empty() {
            body.push('\n');
        }
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "p.txt", body.as_bytes());
        build_index(&p).unwrap();
        let d = Dataset::open(&p).unwrap();
        let got: Vec<&[u8]> = d.records().collect();
        prop_assert_eq!(got, oracle(body.as_bytes()));
    }

    #[test]
    fn same_seed_same_draws(seed in any::<u64>(), w in 0.01f64..10.0, t in 0.1f64..4.0) {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.txt", b"x\ny\nz\n");
        let b = write(dir.path(), "b.txt", b"q\n");
        build_index(&a).unwrap();
        build_index(&b).unwrap();
        let mut s = spec(&[(&a, TaskKind::QaOpen, w), (&b, TaskKind::QaOpen, 1.0)], seed);
        s.temperature = t;
        let m = Mixture::open(s).unwrap();
        let x: Vec<_> = m.sample(50).collect();
        let y: Vec<_> = m.sample(50).collect();
            for d in &x {
            let cap = if d.0 == 0 { 3 } else { 1 };
            prop_assert!(d.1 < cap);
        }
        prop_assert_eq!(x, y);
    }
}
