use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synoie::corpus::{load_corpus, ParsedSentence};
use synoie::encoder::EncoderKind;
use synoie::eval::MatchMode;
use synoie::model::{extract, token_accuracy, ModelError};
use synoie::synth::template_corpus;
use synoie::trainer::{evaluate_checkpoint, evaluate_model, train, Checkpoint, TrainConfig, TrainError};

fn corpus(n: usize) -> Vec<ParsedSentence> {
    template_corpus(&mut ChaCha8Rng::seed_from_u64(21), n)
}

fn quick() -> TrainConfig {
    TrainConfig {
        d_h: 16,
        d_l: 8,
        epochs: 15,
        ..TrainConfig::default()
    }
}

#[test]
fn overfits_twenty_sentences() {
    let c = corpus(20);
    let cfg = TrainConfig {
        epochs: 200,
        dev_fraction: 0.0,
        ..TrainConfig::default()
    };
    let ck = train(&c, &cfg).unwrap();
    assert_eq!(ck.epoch, 200);
    let m = ck.to_model().unwrap();
    assert!(token_accuracy(&m, &c).unwrap() >= 0.99);
    let exact = evaluate_model(&m, &c, MatchMode::Exact).unwrap();
    assert_eq!(exact.f1, 1.0);
}

#[test]
fn same_seed_same_trajectory() {
    let c = corpus(12);
    let a = train(&c, &quick()).unwrap();
    let b = train(&c, &quick()).unwrap();
    assert_eq!(a, b);
    let other = train(&c, &TrainConfig { seed: 43, ..quick() }).unwrap();
    assert_ne!(a.history, other.history);
}

#[test]
fn losses_stay_finite_on_bundled_corpus() {
    let c = load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic.jsonl")).unwrap();
    let ck = train(&c, &TrainConfig { epochs: 5, ..TrainConfig::default() }).unwrap();
    assert_eq!(ck.history.len(), 5);
    for r in &ck.history {
        assert!(r.train_loss.is_finite());
        assert!(r.dev_loss.unwrap().is_finite());
    }
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let c = corpus(10);
    let ck = train(&c, &quick()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ck);

    let (a, b) = (ck.to_model().unwrap(), back.to_model().unwrap());
    for s in &c {
        let (fa, fb) = (a.features(s), b.features(s));
        for &v in s.verbs() {
            let (la, lb) = (a.logits(&fa, v).unwrap(), b.logits(&fb, v).unwrap());
            let bits = |t: &synoie::numerics::Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&la), bits(&lb));
        }
        assert_eq!(extract(s, &a).unwrap(), extract(s, &b).unwrap());
    }
}

#[test]
fn checkpoint_rejects_foreign_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.json");
    let mut ck = train(&corpus(4), &TrainConfig { epochs: 1, ..quick() }).unwrap();
    ck.format = "something-else".into();
    ck.save(&path).unwrap();
    assert!(matches!(Checkpoint::load(&path), Err(TrainError::Checkpoint { .. })));
    ck.format = synoie::trainer::CHECKPOINT_FORMAT.into();
    ck.tensors.pop();
    assert!(ck.to_model().is_err());
}

#[test]
fn evaluation_contracts() {
    let c = corpus(10);
    let ck = train(&c, &quick()).unwrap();
    assert!(matches!(evaluate_checkpoint(&ck, &[], MatchMode::Exact), Err(TrainError::EmptyCorpus)));
    let exact = evaluate_checkpoint(&ck, &c, MatchMode::Exact).unwrap();
    let lexical = evaluate_checkpoint(&ck, &c, MatchMode::Lexical).unwrap();
    assert!(lexical.f1 >= exact.f1);
}

#[test]
fn tagging_baseline_trains() {
    let cfg = TrainConfig {
        use_dep: false,
        use_const: false,
        use_gcn: false,
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
        ..quick()
    };
    let ck = train(&corpus(8), &cfg).unwrap();
    assert!(ck.history.last().unwrap().train_loss < ck.history[0].train_loss);
}

#[test]
fn invalid_settings_are_rejected() {
    let c = corpus(3);
    for cfg in [
        TrainConfig { d_h: 0, ..quick() },
        TrainConfig { alpha: -0.1, ..quick() },
        TrainConfig { dev_fraction: 1.0, ..quick() },
        TrainConfig { batch_size: 0, ..quick() },
    ] {
        assert!(matches!(train(&c, &cfg), Err(TrainError::InvalidConfig(_))));
    }
    let external = TrainConfig {
        encoder: EncoderKind::ExternalPrecomputed,
        ..quick()
    };
    assert!(matches!(
        train(&c, &external),
        Err(TrainError::Model(ModelError::MissingExternalVectors))
    ));
}

#[test]
fn external_vectors_replace_the_toy_encoder() {
    use rand::Rng;
    use std::io::Write;

    let c = corpus(6);
    let d_h = 8;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for s in &c {
        for &v in s.verbs() {
            let rows: Vec<Vec<f64>> = (0..s.len())
                .map(|i| (0..d_h).map(|k| if i == v && k == 0 { 1.0 } else { rng.gen_range(-0.5..0.5) }).collect())
                .collect();
            let line = serde_json::json!({ "sentence_id": s.id, "verb": v, "vectors": rows });
            writeln!(f, "{line}").unwrap();
        }
    }
    drop(f);

    let cfg = TrainConfig {
        d_h,
        d_l: 4,
        epochs: 3,
        encoder: EncoderKind::ExternalPrecomputed,
        external_vectors: Some(path),
        ..TrainConfig::default()
    };
    let ck = train(&c, &cfg).unwrap();
    let m = ck.to_model().unwrap();
    assert!(m.external.is_some());
    assert!(extract(&c[0], &m).unwrap().len() <= 1);

    let mut unknown = c[0].clone();
    unknown.id = "not-in-file".into();
    assert!(extract(&unknown, &m).is_err());
}
