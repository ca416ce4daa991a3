//! Training-protocol contracts: schedule, batch assembly, frozen encoder,
//! withheld target labels, determinism and the small sanity checks around
//! the optimizer.

mod common;

use common::desk_config;
use vacda::config::SynthConfig;
use vacda::data::{DomainShift, PreparedScenario};
use vacda::eval::{baseline_seed, micro_f1, run_seed};
use vacda::model::{Classifier, Encoder};
use vacda::nn::ParamSet;
use vacda::optim::Adam;
use vacda::trainer::*;
use vacda::{Error, Exec};

fn desk() -> (PreparedScenario, RunConfig) {
    let cfg = desk_config();
    (cfg.synthetic.prepare().unwrap(), cfg.run)
}

fn short(mut cfg: RunConfig, epochs: usize) -> RunConfig {
    cfg.epochs = epochs;
    cfg
}

#[test]
fn recorded_learning_rates_follow_the_schedule() {
    let (sc, cfg) = desk();
    let out = pretrain(&sc, &cfg, 0).unwrap();
    let mult: Vec<f64> = (0..20).map(|e| cfg.schedule.multiplier(e)).collect();
    let mut want = vec![1.0; 10];
    want.extend([0.1; 5]);
    want.extend([0.01; 5]);
    assert_eq!(mult, want);
    for (e, lrs) in out.epoch_lrs.iter().enumerate() {
        assert_eq!(*lrs, [cfg.schedule.lr_at(e, cfg.lr_encdec), cfg.schedule.lr_at(e, cfg.lr_other)]);
    }
    let clf = train_classifier(&out.encoder, &sc, &cfg, 0).unwrap();
    for (e, lr) in clf.epoch_lrs.iter().enumerate() {
        assert_eq!(*lr, cfg.schedule.lr_at(e, cfg.lr_other));
    }
}

#[test]
fn batches_hold_thirty_two_per_domain() {
    let synth = SynthConfig { domains: 5, target: 4, ..SynthConfig::default() };
    let sc = synth.prepare().unwrap();
    let pool = TrainingPool::new(&sc, 32, 3).unwrap();
    assert_eq!(pool.n_domains(), 5);
    for step in 0..2 * pool.epoch_len() {
        let b = pool.batch(step);
        assert_eq!(b.len(), 160);
        let mut per_domain = [0usize; 5];
        for it in &b.items {
            per_domain[it.domain] += 1;
            assert_eq!(it.label.is_some(), it.domain < 4);
        }
        assert_eq!(per_domain, [32; 5]);
    }
    let again = TrainingPool::new(&sc, 32, 3).unwrap();
    assert_eq!(pool.batch(7).inputs(), again.batch(7).inputs());
}

#[test]
fn classifier_stage_leaves_the_encoder_untouched() {
    let (sc, cfg) = desk();
    let cfg = short(cfg, 3);
    let pre = pretrain(&sc, &cfg, 1).unwrap();
    let before = pre.checkpoint().to_bytes();
    let hash = pre.encoder.params().content_hash();
    let encoder = pre.encoder.clone();
    train_classifier(&encoder, &sc, &cfg, 1).unwrap();
    assert_eq!(encoder.params().content_hash(), hash);
    assert_eq!(encoder.params(), pre.encoder.params());
    assert_eq!(pre.checkpoint().to_bytes(), before);
}

#[test]
fn training_never_reads_target_labels() {
    let (sc, cfg) = desk();
    let cfg = short(cfg, 2);
    assert_eq!(sc.target().withheld_label_reads(), 0);
    let pre = pretrain(&sc, &cfg, 0).unwrap();
    train_classifier(&pre.encoder, &sc, &cfg, 0).unwrap();
    source_only(&sc, &cfg, 0).unwrap();
    assert_eq!(sc.target().withheld_label_reads(), 0);
    let r = run_seed(&sc, &cfg, 0).unwrap();
    assert_eq!(r.label_reads_during_training, 0);
    // scoring reads the test and train labels once each
    assert_eq!(sc.target().withheld_label_reads(), 2);
}

#[test]
fn identical_runs_are_bit_identical() {
    let (sc, cfg) = desk();
    let cfg = short(cfg, 4);
    let a = pretrain(&sc, &cfg, 5).unwrap();
    let b = pretrain(&sc, &cfg, 5).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.checkpoint().to_bytes(), b.checkpoint().to_bytes());

    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_loss_log(&pa, &a.log).unwrap();
    write_loss_log(&pb, &b.log).unwrap();
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    assert_eq!(read_loss_log(&pa).unwrap(), a.log);

    let ca = train_classifier(&a.encoder, &sc, &cfg, 5).unwrap();
    let cb = train_classifier(&b.encoder, &sc, &cfg, 5).unwrap();
    assert_eq!(ca.classifier.params(), cb.classifier.params());
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let (sc, cfg) = desk();
    let par = RunConfig { parallel: true, ..short(cfg.clone(), 2) };
    let seq = RunConfig { parallel: false, ..short(cfg, 2) };
    let a = pretrain(&sc, &par, 2).unwrap();
    let b = pretrain(&sc, &seq, 2).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.checkpoint().to_bytes(), b.checkpoint().to_bytes());
}

#[test]
fn mean_latent_classifier_is_deterministic() {
    let (sc, cfg) = desk();
    let cfg = RunConfig { latent_for_classifier: LatentMode::Mean, ..short(cfg, 3) };
    let pre = pretrain(&sc, &cfg, 0).unwrap();
    let a = train_classifier(&pre.encoder, &sc, &cfg, 0).unwrap();
    let b = train_classifier(&pre.encoder, &sc, &cfg, 0).unwrap();
    assert_eq!(a.classifier.params(), b.classifier.params());
    assert_eq!(a.val_f1, b.val_f1);
}

#[test]
fn ablation_logs_zero_contrastive_terms() {
    let (sc, cfg) = desk();
    let cfg = RunConfig { contrastive: false, ..short(cfg, 2) };
    let out = pretrain(&sc, &cfg, 0).unwrap();
    assert!(!out.log.is_empty());
    for row in &out.log {
        assert_eq!((row.con_self, row.con_sup), (0.0, 0.0));
        assert!(row.total > 0.0);
    }
    let full = pretrain(&sc, &RunConfig { contrastive: true, ..cfg }, 0).unwrap();
    assert!(full.log.iter().all(|r| r.con_self > 0.0));
}

#[test]
fn one_small_step_lowers_the_objective() {
    let (sc, cfg) = desk();
    let pre = pretrain(&sc, &short(cfg.clone(), 1), 9).unwrap();
    let pool = TrainingPool::new(&sc, cfg.batch_per_domain, 9).unwrap();
    let mb = pool.batch(0);
    let mut inputs: Vec<Vec<f64>> = mb.inputs().iter().map(|x| x.to_vec()).collect();
    // a shifted copy stands in for the augmented view
    inputs.extend(mb.inputs().iter().map(|x| x.iter().map(|v| v * 0.9 + 0.05).collect::<Vec<f64>>()));
    let eps = vec![vec![0.3; cfg.net.latent_dim]; inputs.len()];
    let batch = PretrainBatch { inputs, eps, labels: mb.labels() };
    let obj = cfg.objective();
    let (mut enc, mut dec, mut proj) = (pre.encoder, pre.decoder, pre.projector);
    let (before, g) = pretrain_objective(&enc, &dec, &proj, &batch, &obj, Exec::Sequential).unwrap();
    let step = |ps: &mut ParamSet, g: &[f64]| Adam::new(ps.len(), cfg.optimizer).step(ps, g, 1e-6);
    step(enc.params_mut(), &g.encoder);
    step(dec.params_mut(), &g.decoder);
    step(proj.params_mut(), &g.projector);
    let (after, _) = pretrain_objective(&enc, &dec, &proj, &batch, &obj, Exec::Sequential).unwrap();
    assert!(after.total < before.total, "{} -> {}", before.total, after.total);
}

#[test]
fn zero_classifier_predicts_class_zero() {
    let (sc, cfg) = desk();
    let spec = cfg.net.for_data(3, 16, 4);
    let mut rng = vacda::rng::stream(0, "test", &[]);
    let enc = Encoder::new(&spec, &mut rng).unwrap();
    let mut clf = Classifier::new(&spec, &mut rng).unwrap();
    clf.params_mut().values_mut().fill(0.0);
    let windows = sc.target().split(vacda::data::Split::Test);
    let a = predict(&enc, &clf, windows, Exec::Parallel).unwrap();
    assert_eq!(a.len(), windows.len());
    assert!(a.iter().all(|&p| p == 0));
    let wrong = Encoder::new(&cfg.net.for_data(3, 20, 4), &mut rng).unwrap();
    assert!(matches!(predict(&wrong, &clf, windows, Exec::Sequential), Err(Error::Shape(_))));
}

#[test]
fn desk_run_converges_and_fits_the_sources() {
    let (sc, cfg) = desk();
    let r = run_seed(&sc, &cfg, 0).unwrap();
    let means = r.pretrain.epoch_means();
    assert!(means[19] < 0.5 * means[0], "{means:?}");
    let best = r.classifier.val_f1[r.classifier.best_epoch];
    assert!(best >= 0.9, "source validation micro-F1 {best}");
    assert_eq!(best, r.classifier.val_f1.iter().cloned().fold(0.0, f64::max));
}

#[test]
fn baseline_solves_an_unshifted_scenario() {
    let cfg = desk_config();
    let mut synth = cfg.synthetic.clone();
    let mut model = synth.model();
    for d in &mut model.domains {
        *d = DomainShift { noise: 0.1, ..DomainShift::identity() };
    }
    synth.model = Some(model);
    let sc = synth.prepare().unwrap();
    let (test, _) = baseline_seed(&sc, &cfg.run, 0).unwrap();
    assert!(test >= 0.9, "source-only on identical domains: {test}");
}

#[test]
fn divergence_is_reported_with_its_step() {
    let (sc, cfg) = desk();
    let cfg = RunConfig { recon_weight: f64::MAX, ..short(cfg, 1) };
    match pretrain(&sc, &cfg, 0) {
        Err(e @ Error::NonFinite { .. }) => {
            assert!(e.to_string().contains("epoch 0 step"), "{e}");
            assert_eq!(e.exit_code(), 3);
        }
        other => panic!("expected a non-finite error, got {:?}", other.map(|o| o.log.len())),
    }
}

#[test]
fn scores_are_micro_f1_of_predictions() {
    let (sc, cfg) = desk();
    let cfg = short(cfg, 2);
    let r = run_seed(&sc, &cfg, 0).unwrap();
    let target = sc.target();
    let split = vacda::data::Split::Test;
    let pred = predict(&r.pretrain.encoder, &r.classifier.classifier, target.split(split), Exec::Parallel).unwrap();
    let f1 = micro_f1(&target.eval_labels(split).unwrap(), &pred, 4).unwrap();
    assert_eq!(f1, r.test_f1);
}
