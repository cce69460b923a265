use std::ffi::{c_char, CStr, CString};
use std::ptr;

use chemtext_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    ctk_string_free(p);
    s
}

unsafe fn last_error() -> String {
    let p = ctk_last_error();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_str().unwrap().to_string()
}

#[test]
fn canonical_calls() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(ctk_canonical_smiles(c("OCC").as_ptr(), false, &mut out), CtkStatus::Ok);
        assert_eq!(take(out), "CCO");
        assert!(ctk_last_error().is_null());

        assert_eq!(ctk_canonical_smiles(c("C1CC").as_ptr(), false, &mut out), CtkStatus::InvalidInput);
        assert!(last_error().starts_with("unclosed_ring@1"));

        let mut eq = false;
        let (a, b) = (c("c1ccccc1"), c("C1=CC=CC=C1"));
        assert_eq!(ctk_canonical_equal(a.as_ptr(), b.as_ptr(), false, &mut eq), CtkStatus::Ok);
        assert!(eq);
        let bad = c("C1CC");
        assert_eq!(ctk_canonical_equal(bad.as_ptr(), b.as_ptr(), false, &mut eq), CtkStatus::InvalidInput);
        assert!(!eq);

        assert_eq!(ctk_randomize_smiles(c("CCO").as_ptr(), 3, &mut out), CtkStatus::Ok);
        let r = take(out);
        assert_eq!(ctk_canonical_smiles(c(&r).as_ptr(), false, &mut out), CtkStatus::Ok);
        assert_eq!(take(out), "CCO");

        assert_eq!(ctk_canonical_smiles(ptr::null(), false, &mut out), CtkStatus::NullArgument);
        let bytes = [0xffu8, 0];
        assert_eq!(ctk_canonical_smiles(bytes.as_ptr().cast(), false, &mut out), CtkStatus::InvalidUtf8);
        assert!(!ctk_version().is_null());
    }
}

#[test]
fn tokenizer_and_vocabulary() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(ctk_tokenize_smiles(c("[N+](=O)[O-]").as_ptr(), false, &mut out), CtkStatus::Ok);
        assert_eq!(take(out), "[N+] ( = O ) [O-]");
        assert_eq!(ctk_tokenize_smiles(c("ClCCl").as_ptr(), true, &mut out), CtkStatus::Ok);
        assert_eq!(take(out), "<sm_Cl> <sm_C> <sm_Cl>");
        assert_eq!(ctk_tokenize_smiles(c("C@@@").as_ptr(), true, &mut out), CtkStatus::InvalidInput);

        let mut base = ptr::null_mut();
        assert_eq!(ctk_vocabulary_new(c("describe\nthe").as_ptr(), true, &mut base), CtkStatus::Ok);
        let mut n = 0;
        assert_eq!(ctk_vocabulary_len(base, &mut n), CtkStatus::Ok);
        assert_eq!(n, 5);
        let (mut ext, mut plan, mut skipped) = (ptr::null_mut(), ptr::null_mut(), 0);
        let corpus = c("CCO\nC@@@\nc1ccccc1\n");
        assert_eq!(ctk_vocabulary_extend(base, corpus.as_ptr(), &mut ext, &mut plan, &mut skipped), CtkStatus::Ok);
        assert_eq!(skipped, 1);
        let plan = take(plan);
        assert!(plan.starts_with("base_size=5\n"));
        assert_eq!(ctk_vocabulary_len(ext, &mut n), CtkStatus::Ok);
        assert_eq!(n, 5 + plan.lines().count() - 1);

        let (mut ids, mut len) = (ptr::null_mut(), 0);
        assert_eq!(ctk_encode_text(ext, c("describe CCO").as_ptr(), true, &mut ids, &mut len), CtkStatus::Ok);
        let v = std::slice::from_raw_parts(ids, len).to_vec();
        ctk_ids_free(ids, len);
        assert_eq!(v.len(), 4);
        assert_eq!(ctk_encode_text(ext, c("describe CCS").as_ptr(), true, &mut ids, &mut len), CtkStatus::InvalidInput);

        let mut text = ptr::null_mut();
        assert_eq!(ctk_vocabulary_write(ext, &mut text), CtkStatus::Ok);
        let text = take(text);
        let mut again = ptr::null_mut();
        assert_eq!(ctk_vocabulary_new(c(&text).as_ptr(), false, &mut again), CtkStatus::Ok);
        let mut m = 0;
        ctk_vocabulary_len(again, &mut m);
        assert_eq!(m, n);
        assert_eq!(ctk_vocabulary_new(c("a\na").as_ptr(), true, &mut again), CtkStatus::InvalidInput);
        ctk_vocabulary_free(again);
        ctk_vocabulary_free(ext);
        ctk_vocabulary_free(base);
        ctk_vocabulary_free(ptr::null_mut());
    }
}

#[test]
fn format_and_score() {
    unsafe {
        let mut set = ptr::null_mut();
        assert_eq!(ctk_templates_bundled(&mut set), CtkStatus::Ok);
        let inst = r#"{"task": "prop_classification", "id": "b1", "fields": {"dataset": "bbbp", "smiles": "CCO", "target": 1}}"#;
        let mut out = ptr::null_mut();
        assert_eq!(ctk_format_instance(set, c(inst).as_ptr(), 0, &mut out), CtkStatus::Ok);
        let pair: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(pair["target"], "1");

        let gold = format!("{inst}\n");
        let pred = c(r#"{"id": "b1", "output": "1"}"#);
        let task = c("prop_classification");
        assert_eq!(
            ctk_score(task.as_ptr(), c(&gold).as_ptr(), pred.as_ptr(), ptr::null(), set, &mut out),
            CtkStatus::Ok
        );
        let first: serde_json::Value = serde_json::from_str(take(out).lines().next().unwrap()).unwrap();
        assert_eq!(first["value"], 1.0);

        let retro_gold = c(r#"{"task": "retrosynthesis", "id": "r", "fields": {"target": "CCO.CN"}}"#);
        let retro_pred = c(r#"{"id": "r", "outputs": ["C", "NC.OCC"]}"#);
        let rt = c("retrosynthesis");
        let opts = c(r#"{"k": 2, "match": "canonical"}"#);
        assert_eq!(ctk_score(rt.as_ptr(), retro_gold.as_ptr(), retro_pred.as_ptr(), opts.as_ptr(), ptr::null(), &mut out), CtkStatus::Ok);
        assert!(take(out).contains("\"value\":1.0"));
        let opts = c(r#"{"k": 1}"#);
        assert_eq!(ctk_score(rt.as_ptr(), retro_gold.as_ptr(), retro_pred.as_ptr(), opts.as_ptr(), ptr::null(), &mut out), CtkStatus::Ok);
        assert!(take(out).contains("\"value\":0.0"));
        let bad = c(r#"{"kk": 1}"#);
        assert_eq!(ctk_score(rt.as_ptr(), retro_gold.as_ptr(), retro_pred.as_ptr(), bad.as_ptr(), ptr::null(), &mut out), CtkStatus::InvalidInput);
        let wrong_id = c(r#"{"id": "x", "output": "C"}"#);
        assert_eq!(ctk_score(rt.as_ptr(), retro_gold.as_ptr(), wrong_id.as_ptr(), ptr::null(), ptr::null(), &mut out), CtkStatus::InvalidInput);
        assert!(last_error().contains("mismatch"));
        assert_eq!(ctk_score(c("nope").as_ptr(), retro_gold.as_ptr(), retro_pred.as_ptr(), ptr::null(), ptr::null(), &mut out), CtkStatus::InvalidInput);

        let mut parsed = ptr::null_mut();
        assert_eq!(ctk_templates_parse(c("id: x\n").as_ptr(), &mut parsed), CtkStatus::InvalidInput);
        ctk_templates_free(set);
    }
}

#[test]
fn generation_suite_json() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(ctk_generation_suite(c("C\nC1CC\n").as_ptr(), ptr::null(), ptr::null(), ptr::null(), &mut out), CtkStatus::Ok);
        let s: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(s["valid"], 0.5);
        assert!(s["snn"].is_null());
        let set = c("CCO\nc1ccccc1\nCC(=O)O");
        assert_eq!(ctk_generation_suite(set.as_ptr(), set.as_ptr(), set.as_ptr(), c(r#"{"k": 3}"#).as_ptr(), &mut out), CtkStatus::Ok);
        let s: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!((s["snn"].as_f64(), s["novelty"].as_f64(), s["unique_at_k"].as_f64()), (Some(1.0), Some(0.0), Some(1.0)));
        assert_eq!(ctk_generation_suite(set.as_ptr(), ptr::null(), c("").as_ptr(), ptr::null(), &mut out), CtkStatus::InvalidInput);
        assert_eq!(ctk_generation_suite(set.as_ptr(), ptr::null(), ptr::null(), c(r#"{"k": 9}"#).as_ptr(), &mut out), CtkStatus::Metric);
    }
}

#[test]
fn datasets_and_mixtures() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.txt");
    std::fs::write(&data, "alpha\nbeta\ngamma\n").unwrap();
    let path = c(data.to_str().unwrap());
    unsafe {
        let mut count = 0;
        assert_eq!(ctk_dataset_build_index(path.as_ptr(), &mut count), CtkStatus::Ok);
        assert_eq!(count, 3);
        let mut d = ptr::null_mut();
        assert_eq!(ctk_dataset_open(path.as_ptr(), &mut d), CtkStatus::Ok);
        let (mut p, mut len) = (ptr::null(), 0);
        assert_eq!(ctk_dataset_get(d, 1, &mut p, &mut len), CtkStatus::Ok);
        assert_eq!(std::slice::from_raw_parts(p, len), b"beta");
        assert_eq!(ctk_dataset_get(d, 3, &mut p, &mut len), CtkStatus::OutOfRange);
        let mut n = 0;
        ctk_dataset_len(d, &mut n);
        assert_eq!(n, 3);
        ctk_dataset_free(d);

        let spec = dir.path().join("mix.json");
        std::fs::write(&spec, r#"{"components": [{"path": "d.txt", "task": "qa_open", "weight": 2.0}], "seed": 11}"#).unwrap();
        let spec = c(spec.to_str().unwrap());
        let mut m = ptr::null_mut();
        assert_eq!(ctk_mixture_open(spec.as_ptr(), &mut m), CtkStatus::Ok);
        let (mut comp, mut rec) = ([9usize; 8], [9usize; 8]);
        assert_eq!(ctk_mixture_sample(m, 8, comp.as_mut_ptr(), rec.as_mut_ptr()), CtkStatus::Ok);
        assert!(comp.iter().all(|&x| x == 0) && rec.iter().all(|&r| r < 3));
        let (mut comp2, mut rec2) = ([0usize; 8], [0usize; 8]);
        ctk_mixture_sample(m, 8, comp2.as_mut_ptr(), rec2.as_mut_ptr());
        assert_eq!(rec, rec2);
        assert_eq!(ctk_mixture_record(m, 0, rec[0], &mut p, &mut len), CtkStatus::Ok);
        assert!([&b"alpha"[..], b"beta", b"gamma"].contains(&std::slice::from_raw_parts(p, len)));
        assert_eq!(ctk_mixture_record(m, 1, 0, &mut p, &mut len), CtkStatus::OutOfRange);
        ctk_mixture_free(m);

        std::fs::write(&data, "alpha\nbeta\ndelta\n").unwrap();
        let mut d = ptr::null_mut();
        assert_eq!(ctk_dataset_open(path.as_ptr(), &mut d), CtkStatus::DigestMismatch);
        assert_eq!(ctk_mixture_open(spec.as_ptr(), &mut m), CtkStatus::DigestMismatch);
    }
}

#[test]
fn errors_are_per_thread() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(ctk_canonical_smiles(c("C1CC").as_ptr(), false, &mut out), CtkStatus::InvalidInput);
        std::thread::spawn(|| assert!(ctk_last_error().is_null())).join().unwrap();
        assert!(!ctk_last_error().is_null());
    }
}
