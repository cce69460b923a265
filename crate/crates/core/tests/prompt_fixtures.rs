use chemtext::prompt::{
    decode_spans, encode_spans, format_instance, parse_label, parse_numeric, extract_smiles, DecodeMode,
    TaskInstance, TaskKind, TemplateSet,
};
use chemtext::tokenizer::{detect_smiles_spans, SegmentKind};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Example {
    template: String,
    instance: TaskInstance,
    input: String,
    target: String,
}

fn examples() -> Vec<Example> {
    include_str!("fixtures/worked_examples.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn worked_examples_render_exactly() {
    let set = TemplateSet::bundled();
    for ex in examples() {
        let t = set.get(&ex.template).unwrap_or_else(|| panic!("template {}", ex.template));
        let pair = format_instance(&ex.instance, t).unwrap();
        assert_eq!(pair.input, ex.input, "{}", ex.template);
        assert_eq!(pair.target, ex.target, "{}", ex.template);
    }
}

#[test]
fn seeded_selection_prefers_dataset_templates() {
    let set = TemplateSet::bundled();
    for ex in examples() {
        if ex.instance.field_str("dataset").is_none() {
            continue;
        }
        for seed in 0..8 {
            assert_eq!(set.select(&ex.instance, seed).unwrap().id, ex.template);
        }
    }
}

#[test]
fn outputs_parse_back() {
    let set = TemplateSet::bundled();
    for ex in examples() {
        let t = set.get(&ex.template).unwrap();
        let task = ex.instance.task;
        if task.is_classification() {
            let labels: Vec<String> = if task == TaskKind::QaMultichoice {
                "ABCD".chars().map(String::from).collect()
            } else {
                t.labels.clone()
            };
            let gold = ex.instance.fields["target"].to_string().trim_matches('"').to_string();
            assert_eq!(parse_label(&ex.target, task, &labels), Some(gold), "{}", ex.template);
        } else if task.is_numeric() {
            assert!(parse_numeric(&ex.target).is_some());
        } else if task.is_molecular_output() {
            assert_eq!(extract_smiles(&ex.target).as_deref(), Some(ex.target.as_str()));
        } else if task.is_span_task() {
            let m = t.markers.as_ref().unwrap();
            let text = ex.instance.span_text().unwrap();
            let got = decode_spans(&ex.target, text, m, DecodeMode::Strict);
            let want: Vec<(usize, usize)> = ex.instance.spans.iter().map(|s| (s.start, s.end)).collect();
            assert_eq!(got.spans, want);
        }
    }
}

#[test]
fn quoted_smiles_survive_segmentation() {
    for ex in examples() {
        for (k, v) in &ex.instance.fields {
            let Some(s) = v.as_str() else { continue };
            if !matches!(k.as_str(), "smiles" | "reactants" | "products")
                && !(ex.instance.task.is_molecular_output() && k == "target")
            {
                continue;
            }
            let segs = detect_smiles_spans(&ex.input);
            let field_in_input = ex.input.contains(s);
            if k == "target" || !field_in_input {
                continue;
            }
            assert!(
                segs.iter().any(|g| g.kind == SegmentKind::Smiles && g.content == s),
                "{} not detected in {:?}",
                s,
                ex.template
            );
        }
    }
}

fn text_and_spans() -> impl Strategy<Value = (String, Vec<(usize, usize)>)> {
    prop::collection::vec(("[a-zA-Z0-9,.;()αβ-]{1,8}", any::<bool>(), 1usize..3), 1..25).prop_map(|words| {
        let mut text = String::new();
        let mut starts = Vec::new();
        for (i, (w, _, gap)) in words.iter().enumerate() {
            if i > 0 {
                text.push_str(&" ".repeat(*gap));
            }
            let s = text.chars().count();
            text.push_str(w);
            starts.push((s, text.chars().count()));
        }
        let mut spans = Vec::new();
        let mut i = 0;
        while i < words.len() {
            if words[i].1 {
                let mut j = i;
                while j + 1 < words.len() && words[j + 1].1 && j - i < 3 {
                    j += 1;
                }
                spans.push((starts[i].0, starts[j].1));
                i = j + 2;
            } else {
                i += 1;
            }
        }
        (text, spans)
    })
}

proptest! {
    #[test]
    fn encode_decode_roundtrip((text, spans) in text_and_spans(), wide in any::<bool>()) {
        let mut m = chemtext::prompt::Markers::new("ent*", "*ent");
        if wide {
            m.spacing = chemtext::prompt::MarkerSpacing::Wide;
        }
        let enc = encode_spans(&text, &spans, &m).unwrap();
        let d = decode_spans(&enc, &text, &m, DecodeMode::Aligned);
        prop_assert_eq!(d.spans, spans.clone());
        prop_assert_eq!(d.warnings, 0);
        let d = decode_spans(&enc, &text, &m, DecodeMode::Strict);
        prop_assert_eq!(d.spans, spans);
    }
}
