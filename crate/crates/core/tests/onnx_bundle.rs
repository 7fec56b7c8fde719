#![cfg(feature = "onnx")]

mod common;

use std::path::{Path, PathBuf};

use blanc::backend::{load_bundle, BackendError, MaskedLm, OnnxBackend, SelfTest};
use blanc::masking::{MaskedSlot, ModelInput};
use blanc::scoring::cloze_inputs;
use blanc::text_prep::tokenize;
use blanc::{score_pair, MaskingPolicy, ScoreVariant};

fn bundle_dir() -> PathBuf {
    common::fixture("tiny_bundle")
}

fn copy_bundle(to: &Path) {
    for entry in std::fs::read_dir(bundle_dir()).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), to.join(entry.file_name())).unwrap();
    }
}

#[test]
fn loads_and_passes_self_test() {
    let backend = load_bundle(&bundle_dir()).unwrap();
    let report = backend.self_test().unwrap();
    assert!(report.positions >= 50);
    assert_eq!(report.agreeing, report.positions);
    assert_eq!(report.tokenization_cases, 100);
}

#[test]
fn tokenizer_matches_reference_ids() {
    let backend = load_bundle(&bundle_dir()).unwrap();
    let fixture = SelfTest::read(&bundle_dir().join("selftest.json")).unwrap();
    for case in &fixture.tokenization {
        let ids: Vec<u32> = tokenize(&case.text, backend.vocab())
            .iter()
            .map(|t| t.vocab_id)
            .collect();
        assert_eq!(ids, case.ids, "{:?}", case.text);
    }
}

#[test]
fn missing_and_broken_components_are_named() {
    let dir = tempfile::tempdir().unwrap();
    copy_bundle(dir.path());
    std::fs::remove_file(dir.path().join("vocab.txt")).unwrap();
    let err = OnnxBackend::load(dir.path()).unwrap_err();
    assert_eq!(err.component(), Some("vocabulary"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    copy_bundle(dir.path());
    std::fs::write(dir.path().join("model.onnx"), b"not a model").unwrap();
    assert_eq!(OnnxBackend::load(dir.path()).unwrap_err().component(), Some("model"));

    let dir = tempfile::tempdir().unwrap();
    copy_bundle(dir.path());
    std::fs::write(dir.path().join("tokenizer.json"), b"{}").unwrap();
    assert_eq!(
        OnnxBackend::load(dir.path()).unwrap_err().component(),
        Some("tokenizer config")
    );

    let err = OnnxBackend::load(&dir.path().join("absent")).unwrap_err();
    assert_eq!(err.component(), Some("bundle"));
}

#[test]
fn corrupted_self_test_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    copy_bundle(dir.path());
    let path = dir.path().join("selftest.json");
    let mut fixture: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for case in fixture["cases"].as_array_mut().unwrap().iter_mut().take(5) {
        for id in case["expected_top_ids"].as_array_mut().unwrap() {
            *id = serde_json::json!((id.as_u64().unwrap() + 1) % 600);
        }
    }
    std::fs::write(&path, fixture.to_string()).unwrap();
    let err = OnnxBackend::load(dir.path()).unwrap_err();
    assert!(matches!(err, BackendError::ModelLoad { .. }));
    assert_eq!(err.component(), Some("self-test"));
}

#[test]
fn batching_does_not_change_outcomes() {
    let pairs = common::fixture_pairs();
    let one = load_bundle(&bundle_dir()).unwrap().with_max_batch(1);
    let many = load_bundle(&bundle_dir()).unwrap().with_max_batch(16);
    let policy = MaskingPolicy::with_gap(3);
    let inputs: Vec<ModelInput> = pairs[..2]
        .iter()
        .flat_map(|p| cloze_inputs(&p.document, &p.summary, &policy, &one).unwrap())
        .flat_map(|(h, b)| [h, b])
        .collect();
    let a = one.predict(&inputs).unwrap();
    let b = many.predict(&inputs).unwrap();
    assert_eq!(a.len(), inputs.len());
    for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
        assert_eq!(x.top_id, y.top_id);
        assert!((x.gold_logit - y.gold_logit).abs() < 1e-4);
    }
}

#[test]
fn probabilities_are_normalized() {
    let backend = load_bundle(&bundle_dir()).unwrap();
    let v = backend.vocab();
    let s = v.special_ids();
    let ids: Vec<u32> = tokenize("The river rose four metres overnight.", v)
        .iter()
        .map(|t| t.vocab_id)
        .collect();
    let mut framed = vec![s.cls.unwrap()];
    framed.extend(&ids);
    framed.push(s.sep.unwrap());
    let position = 2;
    framed[position] = s.mask;
    // one slot per candidate gold id: the gold probabilities must sum to 1
    let masked: Vec<MaskedSlot> = (0..v.len() as u32)
        .map(|gold_id| MaskedSlot { position, gold_id })
        .collect();
    let input = ModelInput {
        segments: vec![0; framed.len()],
        ids: framed,
        masked,
    };
    let out = backend.predict(&[input]).unwrap();
    let total: f64 = out[0].iter().map(|o| o.gold_prob).sum();
    assert!((total - 1.0).abs() < 1e-4, "{total}");
    for o in &out[0] {
        assert!((o.gold_prob.ln() - o.gold_logprob).abs() < 1e-6);
    }
}

#[test]
fn scores_with_bundle() {
    let backend = load_bundle(&bundle_dir()).unwrap();
    let pair = &common::fixture_pairs()[0];
    let policy = MaskingPolicy::default();
    let r = score_pair(&pair.document, &pair.summary, &policy, ScoreVariant::Accuracy, &backend).unwrap();
    assert!(r.n_total > 0 && (-1.0..=1.0).contains(&r.score));
    for v in ScoreVariant::ALL {
        assert_eq!(score_pair(&pair.document, "", &policy, v, &backend).unwrap().score, 0.0);
    }
}
