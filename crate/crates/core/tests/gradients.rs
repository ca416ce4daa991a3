//! Analytic gradients of both training objectives against central finite
//! differences on a tiny network.

mod common;

use common::fd_check as check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vacda::losses::{LossBreakdown, SupconForm};
use vacda::model::{Classifier, Decoder, Encoder, NetSpec, Projector};
use vacda::trainer::{classifier_objective, pretrain_objective, ClassifierBatch, Objective, PretrainBatch};
use vacda::Exec;

fn random_rows(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..len).map(|_| rng.random_range(-1.5..1.5)).collect()).collect()
}

fn weighted(l: &LossBreakdown) -> [f64; 4] {
    [l.recon_weight * l.recon, l.kl, l.con_self, l.con_sup]
}

struct Fixture {
    enc: Encoder,
    dec: Decoder,
    proj: Projector,
    batch: PretrainBatch,
}

fn fixture(seed: u64) -> Fixture {
    let spec = NetSpec::tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = Encoder::new(&spec, &mut rng).unwrap();
    let dec = Decoder::new(&spec, &mut rng).unwrap();
    let proj = Projector::new(&spec, &mut rng).unwrap();
    let b = 4;
    let inputs = random_rows(&mut rng, 2 * b, spec.input_len());
    let eps = random_rows(&mut rng, 2 * b, spec.latent_dim);
    let labels = vec![Some(0), Some(1), Some(0), None];
    Fixture { enc, dec, proj, batch: PretrainBatch { inputs, eps, labels } }
}

fn pretrain_case(form: SupconForm, contrastive: bool) {
    let f = fixture(11);
    let obj = Objective { recon_weight: 1e6, temperature: 0.5, contrastive, supcon_form: form };
    let (loss, g) = pretrain_objective(&f.enc, &f.dec, &f.proj, &f.batch, &obj, Exec::Sequential).unwrap();
    assert!(loss.total.is_finite());
    let Fixture { enc, dec, proj, batch } = &f;
    let run = |e: &Encoder, d: &Decoder, p: &Projector| {
        weighted(&pretrain_objective(e, d, p, batch, &obj, Exec::Sequential).unwrap().0).to_vec()
    };
    let worst_enc = check(enc, Encoder::params_mut, &g.encoder, |e| run(e, dec, proj), "encoder");
    let worst_dec = check(dec, Decoder::params_mut, &g.decoder, |d| run(enc, d, proj), "decoder");
    let worst_proj = check(proj, Projector::params_mut, &g.projector, |p| run(enc, dec, p), "projector");
    eprintln!("{form:?} contrastive={contrastive}: worst rel err enc {worst_enc:.1e} dec {worst_dec:.1e} proj {worst_proj:.1e}");
    if !contrastive {
        assert!(g.projector.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn pretraining_objective_matches_finite_differences() {
    pretrain_case(SupconForm::Fixed, true);
}

#[test]
fn literal_supcon_matches_finite_differences() {
    pretrain_case(SupconForm::Literal, true);
}

#[test]
fn ablation_objective_matches_finite_differences() {
    pretrain_case(SupconForm::Fixed, false);
}

#[test]
fn classifier_objective_matches_finite_differences() {
    let spec = NetSpec::tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let enc = Encoder::new(&spec, &mut rng).unwrap();
    let clf = Classifier::new(&spec, &mut rng).unwrap();
    let b = 5;
    for sampled in [true, false] {
        let batch = ClassifierBatch {
            inputs: random_rows(&mut rng, 2 * b, spec.input_len()),
            eps: sampled.then(|| random_rows(&mut rng, 2 * b, spec.latent_dim)),
            labels: vec![0, 2, 1, 1, 0],
        };
        let (_, g_clf, g_enc) = classifier_objective(&enc, &clf, &batch, true, Exec::Parallel).unwrap();
        let g_enc = g_enc.unwrap();
        let loss = |e: &Encoder, c: &Classifier| {
            vec![classifier_objective(e, c, &batch, false, Exec::Sequential).unwrap().0]
        };
        check(&clf, Classifier::params_mut, &g_clf, |c| loss(&enc, c), "classifier");
        check(&enc, Encoder::params_mut, &g_enc, |e| loss(e, &clf), "encoder");
    }
}

#[test]
fn parallel_and_sequential_gradients_are_bit_identical() {
    let f = fixture(3);
    let obj = Objective { recon_weight: 1e6, temperature: 0.5, contrastive: true, supcon_form: SupconForm::Fixed };
    let a = pretrain_objective(&f.enc, &f.dec, &f.proj, &f.batch, &obj, Exec::Sequential).unwrap();
    let b = pretrain_objective(&f.enc, &f.dec, &f.proj, &f.batch, &obj, Exec::Parallel).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}
