//! Membership-inference attack and protection handler checks.

use postdp_core::mechanisms::{MechanismKind, MechanismSpec, Sensitivity};
use postdp_core::mia::{
    build_attack_dataset, head_attack_records, read_attack_csv, train_attack_classifier, write_attack_csv,
    AttackClassifierConfig, AttackRecord, Provenance,
};
use postdp_core::pipeline::{finetune_head, predict, pretrain_encoder, SyntheticSource};
use postdp_core::protection::{protect_existing, run_query_handler, ReleasedModel};
use postdp_core::{Dataset, RngStream, TrainConfig};
use rand::Rng;

fn small_attack() -> AttackClassifierConfig {
    AttackClassifierConfig { hidden_layers: 2, hidden_width: 16, epochs: 40, ..Default::default() }
}

fn peaked(c: usize, label: usize, peak: f64) -> Vec<f64> {
    let mut p = vec![(1.0 - peak) / (c - 1) as f64; c];
    p[label] = peak;
    p
}

#[test]
fn separable_records_are_learned_perfectly() {
    let mut g = RngStream::new(1, 0).generator();
    let records: Vec<AttackRecord> = (0..200)
        .map(|i| {
            let label = g.gen_range(0..4);
            let member = i % 2 == 0;
            let peak = if member { g.gen_range(0.9..0.99) } else { g.gen_range(0.25..0.4) };
            AttackRecord::new(peaked(4, label, peak), label, member, Provenance::Shadow).unwrap()
        })
        .collect();
    let clf = train_attack_classifier(&records, &small_attack()).unwrap();
    assert_eq!(clf.accuracy(&records).unwrap(), 1.0);
}

#[test]
fn random_membership_is_unlearnable() {
    let mut g = RngStream::new(2, 0).generator();
    let mut make = |n: usize| -> Vec<AttackRecord> {
        (0..n)
            .map(|i| {
                let label = g.gen_range(0..3);
                let raw: Vec<f64> = (0..3).map(|_| g.gen_range(0.01..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let p = raw.iter().map(|v| v / total).collect();
                AttackRecord::new(p, label, i % 2 == 0, Provenance::Shadow).unwrap()
            })
            .collect()
    };
    let train = make(400);
    let held_out = make(2000);
    let clf = train_attack_classifier(&train, &small_attack()).unwrap();
    let acc = clf.accuracy(&held_out).unwrap();
    assert!((acc - 0.5).abs() <= 0.05, "held-out accuracy {acc}");
}

fn mean_confidence(theta: &postdp_core::WeightVector, omega: &postdp_core::WeightVector, d: &Dataset) -> f64 {
    d.records().iter().map(|r| predict(theta, omega, &r.features).unwrap()[r.label]).sum::<f64>() / d.len() as f64
}

#[test]
fn overfit_victim_leaks_membership() {
    let src = SyntheticSource::new(5, 16, 2.0, 40).unwrap();
    let pretrain = src.generate(500, 1).unwrap();
    let (victim_in, victim_out) = (src.generate(50, 2).unwrap(), src.generate(50, 3).unwrap());
    let (shadow_in, shadow_out) = (src.generate(50, 4).unwrap(), src.generate(50, 5).unwrap());
    let theta = pretrain_encoder(&pretrain, &TrainConfig::encoder_default(0)).unwrap();
    let cfg = TrainConfig { epochs: 2000, learning_rate: 1.0, ..TrainConfig::head_default(0) };
    let victim = finetune_head(&theta, &victim_in, &cfg).unwrap();
    let shadow = finetune_head(&theta, &shadow_in, &TrainConfig { seed: 1, ..cfg.clone() }).unwrap();

    let gap = mean_confidence(&theta, &victim, &victim_in) - mean_confidence(&theta, &victim, &victim_out);
    assert!(gap > 0.05, "confidence gap {gap}");

    let train = build_attack_dataset(&theta, &shadow, &shadow_in, &shadow_out, 100, 3).unwrap();
    let clf = train_attack_classifier(&train, &AttackClassifierConfig { epochs: 200, ..small_attack() }).unwrap();
    let eval = head_attack_records(&theta, &victim, &victim_in.take(25), &victim_out.take(25), 4).unwrap();
    assert_eq!(eval.len(), 50);
    let acc = clf.accuracy(&eval).unwrap();
    assert!(acc > 0.55, "attack accuracy {acc}");
}

#[test]
fn attack_data_is_balanced_and_round_trips() {
    let src = SyntheticSource::new(3, 4, 1.0, 1).unwrap();
    let (a, b) = (src.generate(30, 1).unwrap(), src.generate(30, 2).unwrap());
    let theta = pretrain_encoder(&a, &TrainConfig { epochs: 10, ..TrainConfig::encoder_default(0) }).unwrap();
    let omega = finetune_head(&theta, &a, &TrainConfig::head_default(0)).unwrap();
    let records = build_attack_dataset(&theta, &omega, &a, &b, 20, 7).unwrap();
    assert_eq!(records.iter().filter(|r| r.member).count(), 10);
    assert!(build_attack_dataset(&theta, &omega, &a, &b, 7, 7).is_err());
    assert!(build_attack_dataset(&theta, &omega, &a, &b, 100, 7).is_err());

    let mut buf = Vec::new();
    write_attack_csv(&records, &mut buf).unwrap();
    assert_eq!(String::from_utf8_lossy(&buf).lines().count(), records.len() + 1);
    let back = read_attack_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), records.len());
    for (x, y) in back.iter().zip(&records) {
        assert_eq!((x.label(), x.member), (y.label(), y.member));
        assert!(x.output.iter().zip(&y.output).all(|(p, q)| p == q));
    }
}

#[test]
fn query_handler_answers_from_the_noisy_head() {
    let src = SyntheticSource::new(3, 6, 1.0, 2).unwrap();
    let (pre, fine) = (src.generate(60, 1).unwrap(), src.generate(30, 2).unwrap());
    let queries: Vec<Vec<f64>> = src.generate(5, 3).unwrap().features().map(<[f64]>::to_vec).collect();
    let pre_cfg = TrainConfig { epochs: 20, ..TrainConfig::encoder_default(0) };
    let fine_cfg = TrainConfig::head_default(0);
    let spec = MechanismSpec::logistic(0.3).unwrap();
    let (model, answers) = run_query_handler(&pre, &fine, &pre_cfg, &fine_cfg, &spec, 11, &queries).unwrap();

    let noise = model.noise();
    for ((n, c), w) in noise.iter().zip(model.omega_clean().values()).zip(model.omega_noisy().values()) {
        assert_eq!(c + n, *w);
    }
    for (q, a) in queries.iter().zip(&answers) {
        assert_eq!(&predict(model.theta(), model.omega_noisy(), q).unwrap(), a);
        assert_ne!(a, &model.answer_unprotected(q).unwrap());
    }
    let again = protect_existing(model.theta(), model.omega_clean(), &spec, 11).unwrap();
    assert_eq!(again, model);

    let dir = tempfile::tempdir().unwrap();
    let released = model.release(Some(Sensitivity::l1(0.6).unwrap())).unwrap();
    released.export(dir.path()).unwrap();
    let loaded = ReleasedModel::load(dir.path()).unwrap();
    assert_eq!(loaded.omega, *model.omega_noisy());
    assert_eq!(loaded.metadata.kind, MechanismKind::Logistic);
    assert_eq!(loaded.answer(&queries[0]).unwrap(), answers[0]);
}
