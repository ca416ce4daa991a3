//! Independent reference implementations used by several test targets.
//! They favour the plainest possible arithmetic over numerical care.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vacda::config::ExperimentConfig;
use vacda::nn::ParamSet;

pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// The shipped desk-scale configuration.
pub fn desk_config() -> ExperimentConfig {
    ExperimentConfig::load(Some(&configs_dir().join("desk.toml")), &[]).expect("configs/desk.toml loads")
}

pub fn unit_rows(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    ab / (aa.sqrt() * bb.sqrt())
}

pub fn recon_oracle(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    let mut n = 0;
    for i in 0..x.len() {
        for j in 0..x[i].len() {
            s += (x[i][j] - y[i][j]) * (x[i][j] - y[i][j]);
            n += 1;
        }
    }
    s / n as f64
}

pub fn kl_oracle(mu: &[Vec<f64>], lv: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for i in 0..mu.len() {
        for j in 0..mu[i].len() {
            s += 0.5 * (mu[i][j] * mu[i][j] + lv[i][j].exp() - 1.0 - lv[i][j]);
        }
    }
    s / mu.len() as f64
}

pub fn ntxent_oracle(r: &[Vec<f64>], tau: f64) -> f64 {
    let m = r.len();
    let n = m / 2;
    let mut total = 0.0;
    for i in 0..m {
        let j = if i < n { i + n } else { i - n };
        let num = (cosine(&r[i], &r[j]) / tau).exp();
        let mut den = 0.0;
        for k in 0..m {
            if k != i {
                den += (cosine(&r[i], &r[k]) / tau).exp();
            }
        }
        total += -(num / den).ln();
    }
    total / m as f64
}

pub fn supcon_oracle(r: &[Vec<f64>], labels: &[u16], tau: f64, literal: bool) -> Option<f64> {
    let m = r.len();
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..m {
        let mut pos = 0.0;
        let mut neg = 0.0;
        let mut all = 0.0;
        let mut has_pos = false;
        let mut has_neg = false;
        for j in 0..m {
            if j == i {
                continue;
            }
            let e = (cosine(&r[i], &r[j]) / tau).exp();
            all += e;
            if labels[i] == labels[j] {
                pos += e;
                has_pos = true;
            } else {
                neg += e;
                has_neg = true;
            }
        }
        if !has_pos || (literal && !has_neg) {
            continue;
        }
        let mut term = -(pos / all).ln();
        if literal {
            term += -(neg / all).ln();
        }
        total += term;
        count += 1;
    }
    (count > 0).then(|| total / count as f64)
}

pub fn ce_oracle(logits: &[f64], y: usize) -> f64 {
    let mut den = 0.0;
    for l in logits {
        den += l.exp();
    }
    -(logits[y].exp() / den).ln()
}

pub fn classifier_oracle(a: &[Vec<f64>], b: &[Vec<f64>], labels: &[u16]) -> f64 {
    let mut s = 0.0;
    for i in 0..labels.len() {
        s += ce_oracle(&a[i], labels[i] as usize) + ce_oracle(&b[i], labels[i] as usize);
    }
    s / labels.len() as f64
}

/// `|a - n| / max(|a|, |n|)`, or the absolute difference when both values are
/// below `floor`.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < floor {
        (a - n).abs()
    } else {
        (a - n).abs() / scale
    }
}

pub const FD_STEP: f64 = 1e-6;
pub const FD_FLOOR: f64 = 1e-7;
pub const FD_TOL: f64 = 1e-4;

/// Central differences over every parameter of a cloned network, returning
/// the worst relative error. The objective returns its terms separately and
/// each is differenced on its own, which keeps a heavily weighted term from
/// swamping the rounding of the small ones. Panics on the first parameter
/// above [`FD_TOL`].
pub fn fd_check<T: Clone>(
    net: &T,
    params: fn(&mut T) -> &mut ParamSet,
    analytic: &[f64],
    objective: impl Fn(&T) -> Vec<f64>,
    what: &str,
) -> f64 {
    let mut probe = net.clone();
    assert_eq!(params(&mut probe).len(), analytic.len(), "{what}: gradient length");
    let mut worst: f64 = 0.0;
    for i in 0..analytic.len() {
        let v = params(&mut probe).values()[i];
        params(&mut probe).values_mut()[i] = v + FD_STEP;
        let up = objective(&probe);
        params(&mut probe).values_mut()[i] = v - FD_STEP;
        let down = objective(&probe);
        params(&mut probe).values_mut()[i] = v;
        let numeric: f64 = up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * FD_STEP)).sum();
        let e = rel_err(analytic[i], numeric, FD_FLOOR);
        assert!(e < FD_TOL, "{what}[{i}]: analytic {} numeric {numeric} (rel {e:.2e})", analytic[i]);
        worst = worst.max(e);
    }
    worst
}
