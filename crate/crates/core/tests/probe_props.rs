use approx::assert_abs_diff_eq;
use clauseprobe::encoder::{ToyEncoderConfig, ToyEncoderParams};
use clauseprobe::probe::{
    loss_and_grad, predict_one, probe_forward, read_checkpoint, train, write_checkpoint, Checkpoint, CheckpointHeader,
    LabeledVector, ProbeParams, TrainConfig, TrainSet, TrainedModel,
};
use clauseprobe::taskdata::ClauseLabel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arb_input() -> impl Strategy<Value = (usize, usize, u64, Vec<f64>)> {
    (1usize..8, 1usize..8, any::<u64>())
        .prop_flat_map(|(d, h, seed)| (Just(d), Just(h), Just(seed), prop::collection::vec(-5.0f64..5.0, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn equal_logit_shift_leaves_output_unchanged((d, h, seed, x) in arb_input(), c in -50.0f64..50.0) {
        let mut p = ProbeParams::init(d, h, seed).unwrap();
        let before = probe_forward(&x, &p).unwrap();
        let label = predict_one(&x, &p).unwrap();
        let (loss, _) = loss_and_grad(&[(&x, ClauseLabel::Main)], &p).unwrap();
        p.b2 += c;
        let after = probe_forward(&x, &p).unwrap();
        prop_assert!((before.probs[0] - after.probs[0]).abs() < 1e-12);
        prop_assert!((before.probs[1] - after.probs[1]).abs() < 1e-12);
        prop_assert_eq!(predict_one(&x, &p).unwrap(), label);
        let (loss2, _) = loss_and_grad(&[(&x, ClauseLabel::Main)], &p).unwrap();
        prop_assert!((loss - loss2).abs() < 1e-9);
    }

    #[test]
    fn probabilities_are_a_distribution((d, h, seed, x) in arb_input()) {
        let p = ProbeParams::init(d, h, seed).unwrap();
        let out = probe_forward(&x, &p).unwrap();
        prop_assert!(out.probs.iter().all(|&q| (0.0..=1.0).contains(&q)));
        prop_assert!((out.probs[0] + out.probs[1] - 1.0).abs() < 1e-12);
        let argmax = if out.probs[0] > out.probs[1] { ClauseLabel::Main } else { ClauseLabel::Sub };
        prop_assert_eq!(predict_one(&x, &p).unwrap(), argmax);
    }
}

fn noisy_points(n: usize, dim: usize, seed: u64) -> Vec<LabeledVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| LabeledVector {
            x: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            label: if i % 3 == 0 { ClauseLabel::Main } else { ClauseLabel::Sub },
        })
        .collect()
}

#[test]
fn zero_learning_rate_keeps_loss_flat() {
    let data = noisy_points(64, 5, 1);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        batch_size: 16,
        select_best_on_validation: false,
        ..TrainConfig::single_language()
    };
    let out = train(TrainSet::Vectors { train: &data, dev: &[] }, &cfg).unwrap();
    let first = out.history[0].train_loss;
    for r in &out.history {
        assert_abs_diff_eq!(r.train_loss, first, epsilon = 1e-12);
    }
    assert_eq!(out.model.probe, ProbeParams::init(5, 5, cfg.rng_seed).unwrap());
}

fn header(model: &TrainedModel, cfg: &TrainConfig) -> CheckpointHeader {
    CheckpointHeader {
        dim: model.probe.dim(),
        hidden_dim: model.probe.hidden_dim(),
        backend: if model.encoder.is_some() { "toy".into() } else { "file:emb".into() },
        seed: cfg.rng_seed,
        config: cfg.clone(),
        encoder: model.encoder.as_ref().map(|e| e.config()),
        source: "unit".into(),
    }
}

#[test]
fn seeded_training_gives_identical_checkpoint_bytes() {
    let data = noisy_points(100, 6, 2);
    let dev = noisy_points(30, 6, 3);
    let cfg = TrainConfig {
        rng_seed: 11,
        ..TrainConfig::single_language()
    };
    let run = || {
        let out = train(TrainSet::Vectors { train: &data, dev: &dev }, &cfg).unwrap();
        Checkpoint {
            header: header(&out.model, &cfg),
            model: out.model,
        }
        .to_bytes()
        .unwrap()
    };
    assert_eq!(run(), run());
    let other = TrainConfig { rng_seed: 12, ..cfg.clone() };
    let out = train(TrainSet::Vectors { train: &data, dev: &dev }, &other).unwrap();
    let bytes = Checkpoint { header: header(&out.model, &other), model: out.model }.to_bytes().unwrap();
    assert_ne!(bytes, run());
}

#[test]
fn checkpoint_files_round_trip_with_encoder() {
    let enc = ToyEncoderParams::init(
        ToyEncoderConfig {
            vocab_hash_buckets: 32,
            dim: 8,
            n_layers: 2,
            n_heads: 2,
        },
        4,
    )
    .unwrap();
    let model = TrainedModel {
        probe: ProbeParams::init(8, 3, 4).unwrap(),
        encoder: Some(enc),
    };
    let cfg = TrainConfig::zero_shot();
    let ck = Checkpoint { header: header(&model, &cfg), model };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    write_checkpoint(&ck, &path).unwrap();
    let back = read_checkpoint(&path).unwrap();
    assert_eq!(back.header, ck.header);
    assert_eq!(back.to_bytes().unwrap(), ck.to_bytes().unwrap());
    let x = vec![0.25; 8];
    let a = probe_forward(&x, &back.model.probe).unwrap();
    let b = probe_forward(&x, &ck.model.probe).unwrap();
    assert_abs_diff_eq!(a.probs[0], b.probs[0], epsilon = 1e-5);

    let bytes = std::fs::read(&path).unwrap();
    assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 4]).is_err());
    let mut longer = bytes.clone();
    longer.extend([0; 4]);
    assert!(Checkpoint::from_bytes(&longer).is_err());
}
