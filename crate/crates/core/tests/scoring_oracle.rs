mod common;

use blanc::backend::{BackendError, MaskedLm, PredictionOutcome, ReferenceBackend};
use blanc::masking::{mask_positions, MaskedSlot, ModelInput};
use blanc::scoring::{pair_outcomes, score_batch, score_pair, ScoreError};
use blanc::text_prep::{prepare_document, tokenize};
use blanc::vocab::Vocabulary;
use blanc::{MaskingPolicy, PairInput, ScoreVariant};

use common::{fixture_pairs, scoring_fixtures};

// Recount of N_help and N_base that rebuilds every input by hand and asks
// the backend for one input at a time.
fn recount(doc: &str, summary: &str, policy: &MaskingPolicy, backend: &dyn MaskedLm) -> (usize, usize, usize) {
    let vocab = backend.vocab();
    let s = vocab.special_ids();
    let summary_ids: Vec<u32> = tokenize(summary, vocab).iter().map(|t| t.vocab_id).collect();
    let (mut help, mut base, mut total) = (0, 0, 0);
    for sentence in prepare_document(doc, vocab) {
        let room = vocab.max_len() - sentence.tokens.len() - 3;
        let prefix = &summary_ids[..summary_ids.len().min(room)];
        for offset in 1..=policy.gap {
            let masked = mask_positions(&sentence.tokens, policy, offset).unwrap();
            for (kind, context) in [(0, prefix.to_vec()), (1, vec![s.filler; prefix.len()])] {
                let mut ids = vec![s.cls.unwrap()];
                ids.extend(&context);
                ids.push(s.sep.unwrap());
                let start = ids.len();
                let mut slots = Vec::new();
                for (k, t) in sentence.tokens.iter().enumerate() {
                    if masked.contains(&k) {
                        ids.push(s.mask);
                        slots.push(MaskedSlot {
                            position: start + k,
                            gold_id: t.vocab_id,
                        });
                    } else {
                        ids.push(t.vocab_id);
                    }
                }
                ids.push(s.sep.unwrap());
                let mut segments = vec![0; start];
                segments.resize(ids.len(), 1);
                let input = ModelInput {
                    ids,
                    segments,
                    masked: slots,
                };
                for o in &backend.predict(std::slice::from_ref(&input)).unwrap()[0] {
                    if o.top_id == o.gold_id {
                        if kind == 0 {
                            help += 1;
                        } else {
                            base += 1;
                        }
                    }
                }
                if kind == 0 {
                    total += input.masked.len();
                }
            }
        }
    }
    (help, base, total)
}

#[test]
fn accuracy_equals_independent_recount() {
    let backend = ReferenceBackend::builtin();
    let fixtures = scoring_fixtures();
    assert_eq!(fixtures.len(), 50);
    let mut nonzero = 0;
    for (pair, gap) in &fixtures {
        let policy = MaskingPolicy::with_gap(*gap);
        let r = score_pair(&pair.document, &pair.summary, &policy, ScoreVariant::Accuracy, &backend).unwrap();
        let (help, base, total) = recount(&pair.document, &pair.summary, &policy, &backend);
        assert_eq!((r.n_help, r.n_base, r.n_total), (help, base, total), "{}", pair.id);
        assert_eq!(r.score, (help as f64 - base as f64) / total as f64, "{}", pair.id);
        nonzero += usize::from(r.score != 0.0);
    }
    // the fixtures exercise the help path, not just zeros
    assert!(nonzero >= 25, "only {nonzero} non-zero scores");
}

// Vocabulary [PAD] [UNK] [CLS] [SEP] [MASK] . police dog; only "." has a
// non-zero count (9), so the log-frequencies are 0 except ln 10 for ".".
// Context weight 1, no copy term.
fn toy_backend() -> ReferenceBackend {
    let table = "[PAD]\t0\n[UNK]\t0\n[CLS]\t0\n[SEP]\t0\n[MASK]\t0\n.\t9\npolice\t0\ndog\t0\n";
    ReferenceBackend::from_table(table, 1.0).unwrap().with_copy_weight(0.0)
}

#[test]
fn generalized_variants_by_hand() {
    let b = toy_backend();
    // document "Police." masks only "police" (the period is too short);
    // the summary "dog" sits in the help prefix, the base prefix is ".".
    let policy = MaskingPolicy::with_gap(1);
    let out = pair_outcomes("Police.", "dog", &policy, &b).unwrap();
    assert_eq!(out.help.len(), 1);

    // logits: specials 0, "." ln 10, police 0, dog 0; help adds 1 to dog
    let z_base = 5.0 + 10.0 + 1.0 + 1.0; // e^0 * 5 + e^ln10 + e^0 + e^0
    let z_help = 5.0 + 10.0 + 1.0 + std::f64::consts::E;
    let (h, f) = (out.help[0], out.base[0]);
    assert_eq!(h.gold_logit, 0.0);
    assert_eq!(f.gold_logit, 0.0);
    assert!((h.gold_prob - 1.0 / z_help).abs() < 1e-12);
    assert!((f.gold_prob - 1.0 / z_base).abs() < 1e-12);
    assert!((h.gold_logprob + z_help.ln()).abs() < 1e-12);

    let score = |v| score_pair("Police.", "dog", &policy, v, &b).unwrap().score;
    assert_eq!(score(ScoreVariant::Accuracy), 0.0);
    assert_eq!(score(ScoreVariant::Logit), 0.0);
    assert!((score(ScoreVariant::Probability) - (1.0 / z_help - 1.0 / z_base)).abs() < 1e-12);
    assert!((score(ScoreVariant::LogProbability) - (z_base.ln() - z_help.ln())).abs() < 1e-12);

    // with "police" in the summary the help logit of the gold token rises by 1
    let r = pair_outcomes("Police.", "police", &policy, &b).unwrap();
    let z_help = 5.0 + 10.0 + std::f64::consts::E + 1.0;
    assert_eq!(r.help[0].gold_logit, 1.0);
    let logit = score_pair("Police.", "police", &policy, ScoreVariant::Logit, &b).unwrap();
    assert_eq!(logit.score, 1.0);
    let lp = score_pair("Police.", "police", &policy, ScoreVariant::LogProbability, &b).unwrap();
    assert!((lp.score - ((1.0 - z_help.ln()) - (0.0 - z_base.ln()))).abs() < 1e-12);
}

#[test]
fn empty_summary_scores_exactly_zero() {
    let backend = ReferenceBackend::builtin();
    for pair in fixture_pairs() {
        for variant in ScoreVariant::ALL {
            let r = score_pair(&pair.document, "", &MaskingPolicy::default(), variant, &backend).unwrap();
            assert_eq!(r.score, 0.0, "{} {variant}", pair.id);
            assert_eq!(r.n_help, r.n_base);
        }
    }
}

#[test]
fn nothing_to_mask_is_an_error() {
    let backend = ReferenceBackend::builtin();
    let r = score_pair(
        "A b c.",
        "summary",
        &MaskingPolicy::default(),
        ScoreVariant::Accuracy,
        &backend,
    );
    assert!(matches!(r, Err(ScoreError::NoMaskableTokens)));
    let r = score_pair(
        "",
        "summary",
        &MaskingPolicy::default(),
        ScoreVariant::Accuracy,
        &backend,
    );
    assert!(matches!(r, Err(ScoreError::NoMaskableTokens)));
}

#[test]
fn batch_matches_sequential_for_any_parallelism() {
    let backend = ReferenceBackend::builtin();
    let pairs = fixture_pairs();
    let policy = MaskingPolicy::with_gap(2);
    let sequential: Vec<_> = pairs
        .iter()
        .map(|p| score_pair(&p.document, &p.summary, &policy, ScoreVariant::Probability, &backend).unwrap())
        .collect();
    for threads in [1, 2, 8] {
        let batch = score_batch(&pairs, &policy, ScoreVariant::Probability, &backend, threads).unwrap();
        for ((id, r), (p, s)) in batch.iter().zip(pairs.iter().zip(&sequential)) {
            assert_eq!(id, &p.id);
            assert_eq!(r.as_ref().unwrap(), s);
        }
    }
}

#[test]
fn batch_isolates_failures_and_rejects_duplicates() {
    let backend = ReferenceBackend::builtin();
    let mut pairs = fixture_pairs()[..3].to_vec();
    pairs.insert(1, PairInput::new("empty", "", "x"));
    let out = score_batch(&pairs, &MaskingPolicy::default(), ScoreVariant::Accuracy, &backend, 4).unwrap();
    assert!(out[0].1.is_ok());
    assert!(matches!(out[1].1, Err(ScoreError::NoMaskableTokens)));
    assert!(out[2].1.is_ok() && out[3].1.is_ok());

    pairs.push(pairs[0].clone());
    assert!(matches!(
        score_batch(&pairs, &MaskingPolicy::default(), ScoreVariant::Accuracy, &backend, 1),
        Err(ScoreError::DuplicateId(_))
    ));
}

struct Serial(ReferenceBackend);

impl MaskedLm for Serial {
    fn vocab(&self) -> &Vocabulary {
        self.0.vocab()
    }

    fn predict(&self, inputs: &[ModelInput]) -> Result<Vec<Vec<PredictionOutcome>>, BackendError> {
        self.0.predict(inputs)
    }

    fn supports_concurrency(&self) -> bool {
        false
    }
}

#[test]
fn non_concurrent_backend_gives_same_results() {
    let backend = Serial(ReferenceBackend::builtin());
    let pairs = fixture_pairs();
    let policy = MaskingPolicy::default();
    let one = score_batch(&pairs, &policy, ScoreVariant::Accuracy, &backend, 1).unwrap();
    let many = score_batch(&pairs, &policy, ScoreVariant::Accuracy, &backend, 6).unwrap();
    assert_eq!(format!("{one:?}"), format!("{many:?}"));
}

#[test]
fn long_summary_is_truncated_not_rejected() {
    let backend = ReferenceBackend::builtin();
    let pair = &fixture_pairs()[0];
    let long_summary = pair.summary.repeat(40);
    assert!(tokenize(&long_summary, backend.vocab()).len() > 600);
    let r = score_pair(
        &pair.document,
        &long_summary,
        &MaskingPolicy::default(),
        ScoreVariant::Accuracy,
        &backend,
    );
    assert!(r.is_ok());
}
