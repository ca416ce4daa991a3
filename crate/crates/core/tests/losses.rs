//! Every loss against a naive reference implementation, plus the algebraic
//! properties the training code relies on.

mod common;

use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use vacda::losses::*;
use vacda::Error;

const TOL: f64 = 1e-10;
const BATCHES: u64 = 100;

fn rows(rng: &mut ChaCha8Rng, n: usize, p: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..p).map(|_| rng.random_range(lo..hi)).collect()).collect()
}

#[test]
fn recon_matches_oracle() {
    for b in 0..BATCHES {
        let mut rng = ChaCha8Rng::seed_from_u64(b);
        let n = rng.random_range(2..=16);
        let p = rng.random_range(1..=24);
        let x = rows(&mut rng, n, p, -3.0, 3.0);
        let y = rows(&mut rng, n, p, -3.0, 3.0);
        let got = recon_loss(&x, &y).unwrap();
        assert!((got - recon_oracle(&x, &y)).abs() < TOL, "batch {b}");
    }
}

#[test]
fn kl_matches_oracle() {
    for b in 0..BATCHES {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + b);
        let n = rng.random_range(2..=16);
        let p = rng.random_range(1..=8);
        let mu = rows(&mut rng, n, p, -2.0, 2.0);
        let lv = rows(&mut rng, n, p, -3.0, 3.0);
        assert!((kl_loss(&mu, &lv) - kl_oracle(&mu, &lv)).abs() < TOL, "batch {b}");
    }
}

#[test]
fn ntxent_matches_oracle() {
    for b in 0..BATCHES {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + b);
        let n = rng.random_range(1..=8);
        let p = rng.random_range(2..=8);
        let tau = rng.random_range(0.1..1.0);
        let r = unit_rows(&mut rng, 2 * n, p);
        let got = ntxent_loss(&r, tau).unwrap();
        assert!((got - ntxent_oracle(&r, tau)).abs() < TOL, "batch {b}");
    }
}

#[test]
fn supcon_matches_oracle_in_both_forms() {
    let mut compared = 0;
    for b in 0..BATCHES {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + b);
        let m = rng.random_range(2..=16);
        let p = rng.random_range(2..=8);
        let k = rng.random_range(2..=4);
        let tau = rng.random_range(0.1..1.0);
        let r = unit_rows(&mut rng, m, p);
        let labels: Vec<u16> = (0..m).map(|_| rng.random_range(0..k)).collect();
        for (form, literal) in [(SupconForm::Fixed, false), (SupconForm::Literal, true)] {
            match (supcon_loss(&r, &labels, tau, form), supcon_oracle(&r, &labels, tau, literal)) {
                (Ok(got), Some(want)) => {
                    assert!((got - want).abs() < TOL, "batch {b} {form:?}");
                    compared += 1;
                }
                (Err(Error::DegenerateBatch(_)), None) => {}
                (got, want) => panic!("batch {b} {form:?}: {got:?} vs oracle {want:?}"),
            }
        }
    }
    assert!(compared > 150, "too few non-degenerate batches: {compared}");
}

#[test]
fn classifier_loss_matches_oracle() {
    for b in 0..BATCHES {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + b);
        let n = rng.random_range(2..=16);
        let k = rng.random_range(2..=6);
        let a = rows(&mut rng, n, k, -4.0, 4.0);
        let c = rows(&mut rng, n, k, -4.0, 4.0);
        let labels: Vec<u16> = (0..n).map(|_| rng.random_range(0..k as u16)).collect();
        let got = classifier_loss(&a, &c, &labels).unwrap();
        assert!((got - classifier_oracle(&a, &c, &labels)).abs() < TOL, "batch {b}");
        let (single, _) = cross_entropy_grad(&a, &labels).unwrap();
        let want: f64 = (0..n).map(|i| ce_oracle(&a[i], labels[i] as usize)).sum::<f64>() / n as f64;
        assert!((single - want).abs() < TOL, "batch {b} single view");
    }
}

/// `E_q[log q(z) - log p(z)]` by sampling, against the closed form.
#[test]
fn kl_closed_form_matches_monte_carlo() {
    let cases = [(vec![0.0], vec![4f64.ln()]), (vec![1.0, -0.5, 0.3], vec![0.2, -1.0, 0.7])];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (mu, lv) in cases {
        let closed = kl_loss(&[mu.clone()], &[lv.clone()]);
        let samples = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            for d in 0..mu.len() {
                let sd = (0.5 * lv[d]).exp();
                let z = Normal::new(mu[d], sd).unwrap().sample(&mut rng);
                let log_q = -0.5 * ((z - mu[d]) / sd).powi(2) - sd.ln();
                let log_p = -0.5 * z * z;
                acc += log_q - log_p;
            }
        }
        let mc = acc / samples as f64;
        assert!((mc - closed).abs() / closed < 0.01, "closed {closed} vs mc {mc}");
    }
}

#[test]
fn ntxent_drops_when_a_positive_pair_tightens() {
    // pair 0 lives in span(e0, e1); pairs 1 and 2 sit on e2 and e3, so
    // turning the partner of row 0 changes no other similarity
    let batch = |theta: f64| {
        let e = |k: usize| {
            let mut v = vec![0.0; 4];
            v[k] = 1.0;
            v
        };
        vec![e(0), e(2), e(3), vec![theta.cos(), theta.sin(), 0.0, 0.0], e(2), e(3)]
    };
    let mut prev = f64::INFINITY;
    for step in (0..=10).rev() {
        let theta = step as f64 * 0.3;
        let l = ntxent_loss(&batch(theta), 0.5).unwrap();
        assert!(l < prev, "theta {theta}: {l} not below {prev}");
        prev = l;
    }
}

#[test]
fn contrastive_losses_are_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let n = rng.random_range(2..=8);
        let r = unit_rows(&mut rng, 2 * n, 5);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let permuted: Vec<Vec<f64>> =
            order.iter().map(|&i| r[i].clone()).chain(order.iter().map(|&i| r[i + n].clone())).collect();
        let a = ntxent_loss(&r, 0.5).unwrap();
        let b = ntxent_loss(&permuted, 0.5).unwrap();
        assert!((a - b).abs() < 1e-12);

        let labels: Vec<u16> = (0..2 * n).map(|i| (i % 3) as u16).collect();
        let mut idx: Vec<usize> = (0..2 * n).collect();
        idx.shuffle(&mut rng);
        let pr: Vec<Vec<f64>> = idx.iter().map(|&i| r[i].clone()).collect();
        let pl: Vec<u16> = idx.iter().map(|&i| labels[i]).collect();
        for form in [SupconForm::Fixed, SupconForm::Literal] {
            let a = supcon_loss(&r, &labels, 0.5, form).unwrap();
            let b = supcon_loss(&pr, &pl, 0.5, form).unwrap();
            assert!((a - b).abs() < 1e-12, "{form:?}");
        }
    }
}

const H: f64 = 1e-6;

fn fd_rows(x: &[Vec<f64>], analytic: &[Vec<f64>], f: impl Fn(&[Vec<f64>]) -> f64) {
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        for j in 0..x[i].len() {
            probe[i][j] = x[i][j] + H;
            let up = f(&probe);
            probe[i][j] = x[i][j] - H;
            let down = f(&probe);
            probe[i][j] = x[i][j];
            let numeric = (up - down) / (2.0 * H);
            let e = rel_err(analytic[i][j], numeric, 1e-7);
            assert!(e < 1e-4, "[{i}][{j}] analytic {} numeric {numeric}", analytic[i][j]);
        }
    }
}

#[test]
fn input_gradients_match_finite_differences() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let x = rows(&mut rng, 4, 6, -1.0, 1.0);
        let y = rows(&mut rng, 4, 6, -1.0, 1.0);
        let (_, g) = recon_loss_grad(&x, &y).unwrap();
        fd_rows(&y, &g, |p| recon_loss(&x, p).unwrap());

        let mu = rows(&mut rng, 3, 4, -1.0, 1.0);
        let lv = rows(&mut rng, 3, 4, -2.0, 2.0);
        let (_, gm, gl) = kl_loss_grad(&mu, &lv);
        fd_rows(&mu, &gm, |p| kl_loss(p, &lv));
        fd_rows(&lv, &gl, |p| kl_loss(&mu, p));

        let r = unit_rows(&mut rng, 6, 4);
        let (_, g) = ntxent_loss_grad(&r, 0.5).unwrap();
        fd_rows(&r, &g, |p| ntxent_loss(p, 0.5).unwrap());

        let labels = [0u16, 1, 0, 2, 1, 0];
        for form in [SupconForm::Fixed, SupconForm::Literal] {
            let (_, g) = supcon_loss_grad(&r, &labels, 0.5, form).unwrap();
            fd_rows(&r, &g, |p| supcon_loss(p, &labels, 0.5, form).unwrap());
        }

        let a = rows(&mut rng, 3, 4, -2.0, 2.0);
        let c = rows(&mut rng, 3, 4, -2.0, 2.0);
        let lab = [1u16, 3, 0];
        let (_, ga, gc) = classifier_loss_grad(&a, &c, &lab).unwrap();
        fd_rows(&a, &ga, |p| classifier_loss(p, &c, &lab).unwrap());
        fd_rows(&c, &gc, |p| classifier_loss(&a, p, &lab).unwrap());
    }
}

#[test]
fn anchors() {
    let same = vec![vec![0.6, 0.8]; 4];
    assert!((ntxent_loss(&same, 0.5).unwrap() - 3f64.ln()).abs() < 1e-9);
    assert_eq!(kl_loss(&[vec![1.0]], &[vec![0.0]]), 0.5);
    let uniform = vec![vec![0.0; 4]; 3];
    let v = classifier_loss(&uniform, &uniform, &[0, 1, 2]).unwrap();
    assert!((v - 2.0 * 4f64.ln()).abs() < 1e-12);
    let e = std::f64::consts::E;
    let r = [vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
    let first = -(e * e / (e * e + 1.0)).ln();
    let got = supcon_loss(&r, &[0, 0, 1], 0.5, SupconForm::Fixed).unwrap();
    // anchors 0 and 1 are symmetric and anchor 2 has no positive
    assert!((got - first).abs() < 1e-12);
    assert!(matches!(supcon_loss(&r, &[0, 1, 2], 0.5, SupconForm::Fixed), Err(Error::DegenerateBatch(_))));
    assert!(matches!(ntxent_loss(&same, 0.0), Err(Error::Config(_))));
}

#[test]
fn totals_and_ablation() {
    let parts = LossParts { recon: 2e-6, kl: 1.0, con_self: 1.0, con_sup: 1.0 };
    let t = total_pretrain_loss(parts, 1e6, 0.5, true).unwrap();
    assert!((t.total - 5.0).abs() < 1e-12);
    let t = total_pretrain_loss(parts, 1e6, 0.5, false).unwrap();
    assert_eq!((t.con_self, t.con_sup), (0.0, 0.0));
    assert_eq!(t.total, 1e6 * 2e-6 + 1.0);
    let bad = LossParts { kl: f64::NAN, ..parts };
    match total_pretrain_loss(bad, 1e6, 0.5, true) {
        Err(e @ Error::NonFinite { .. }) => assert!(e.to_string().contains("kl")),
        other => panic!("{other:?}"),
    }
}

fn unit_batch(seed: u64, m: usize, p: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| {
            let v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

proptest! {
    #[test]
    fn losses_are_nonnegative(seed in any::<u64>(), n in 1usize..8, p in 2usize..6, tau in 0.05f64..2.0) {
        let r = unit_batch(seed, 2 * n, p);
        prop_assert!(ntxent_loss(&r, tau).unwrap() >= -1e-12);
        let labels: Vec<u16> = (0..2 * n).map(|i| (i % 2) as u16).collect();
        if let Ok(v) = supcon_loss(&r, &labels, tau, SupconForm::Fixed) {
            prop_assert!(v >= -1e-12);
        }
        let mu = unit_batch(seed ^ 1, n, p);
        let lv = unit_batch(seed ^ 2, n, p);
        prop_assert!(kl_loss(&mu, &lv) >= 0.0);
        prop_assert!(recon_loss(&mu, &lv).unwrap() >= 0.0);
        let lab: Vec<u16> = (0..n).map(|i| (i % p) as u16).collect();
        prop_assert!(classifier_loss(&mu, &lv, &lab).unwrap() >= 0.0);
    }

    #[test]
    fn softmax_sums_to_one(logits in prop::collection::vec(-50.0f64..50.0, 1..10)) {
        let s: f64 = softmax(&logits).iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }
}
