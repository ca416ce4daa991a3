//! Stochastic time-series augmentations and the augmented-view policy.
//!
//! All functions take channel-major window values (`w[ch * len + t]`) and an
//! explicit generator; none of them touch global state.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rng;

/// Smallest interpolated speed allowed in a time warp.
const MIN_WARP_SPEED: f64 = 1e-2;
/// Smallest per-channel scaling factor.
const MIN_SCALE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentPolicy {
    PickOneUniform,
    ComposeAll,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AugmentKind {
    Jitter,
    Scale,
    TimeWarp,
    Rotate,
}

impl AugmentKind {
    pub const ALL: [AugmentKind; 4] = [
        AugmentKind::Jitter,
        AugmentKind::Scale,
        AugmentKind::TimeWarp,
        AugmentKind::Rotate,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub jitter_sigma: f64,
    pub scale_sigma: f64,
    pub warp_knots: usize,
    pub warp_sigma: f64,
    /// Radians.
    pub rotation_max_angle: f64,
    pub policy: AugmentPolicy,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            jitter_sigma: 0.05,
            scale_sigma: 0.1,
            warp_knots: 4,
            warp_sigma: 0.2,
            rotation_max_angle: std::f64::consts::PI,
            policy: AugmentPolicy::PickOneUniform,
            rng_seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Every augmentation reduced to the identity.
    pub fn degenerate() -> Self {
        Self {
            jitter_sigma: 0.0,
            scale_sigma: 0.0,
            warp_sigma: 0.0,
            rotation_max_angle: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [
            ("augment.jitter_sigma", self.jitter_sigma),
            ("augment.scale_sigma", self.scale_sigma),
            ("augment.warp_sigma", self.warp_sigma),
        ];
        for (name, s) in sigmas {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::config(format!("{name} must be a finite value >= 0, got {s}")));
            }
        }
        if self.warp_knots < 2 {
            return Err(Error::config("augment.warp_knots must be at least 2"));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.rotation_max_angle) {
            return Err(Error::config("augment.rotation_max_angle must lie in [0, pi]"));
        }
        Ok(())
    }
}

fn normal(mean: f64, sigma: f64) -> Normal<f64> {
    Normal::new(mean, sigma).expect("sigma validated non-negative")
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every element.
pub fn jitter<R: Rng + ?Sized>(w: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma == 0.0 {
        return w.to_vec();
    }
    let n = normal(0.0, sigma);
    w.iter().map(|v| v + n.sample(rng)).collect()
}

/// One factor per channel from `N(1, sigma^2)`, clamped to at least 0.1.
pub fn scale_factors<R: Rng + ?Sized>(channels: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0; channels];
    }
    let n = normal(1.0, sigma);
    (0..channels).map(|_| n.sample(rng).max(MIN_SCALE)).collect()
}

pub fn apply_scale(w: &[f64], channels: usize, factors: &[f64]) -> Vec<f64> {
    let len = w.len() / channels;
    w.iter()
        .enumerate()
        .map(|(i, v)| v * factors[i / len])
        .collect()
}

pub fn scale<R: Rng + ?Sized>(w: &[f64], channels: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    let f = scale_factors(channels, sigma, rng);
    apply_scale(w, channels, &f)
}

/// Natural cubic spline through `(xs, ys)` evaluated at `at`.
fn natural_spline(xs: &[f64], ys: &[f64], at: impl Iterator<Item = f64>) -> Vec<f64> {
    let n = xs.len();
    debug_assert!(n >= 2 && ys.len() == n);
    let h: Vec<f64> = xs.windows(2).map(|p| p[1] - p[0]).collect();
    // second derivatives, zero at both ends
    let mut m = vec![0.0; n];
    if n > 2 {
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
        }
        // Thomas algorithm; off-diagonals are h[i + 1]
        for i in 1..k {
            let f = h[i] / diag[i - 1];
            diag[i] -= f * h[i];
            rhs[i] -= f * rhs[i - 1];
        }
        for i in (0..k).rev() {
            let upper = if i + 1 < k { h[i + 1] * m[i + 2] } else { 0.0 };
            m[i + 1] = (rhs[i] - upper) / diag[i];
        }
    }
    at.map(|x| {
        let j = xs[..n - 1].partition_point(|&k| k <= x).saturating_sub(1).min(n - 2);
        let (x0, x1, hj) = (xs[j], xs[j + 1], h[j]);
        let (a, b) = (x1 - x, x - x0);
        m[j] * a.powi(3) / (6.0 * hj)
            + m[j + 1] * b.powi(3) / (6.0 * hj)
            + (ys[j] / hj - m[j] * hj / 6.0) * a
            + (ys[j + 1] / hj - m[j + 1] * hj / 6.0) * b
    })
    .collect()
}

/// A strictly increasing time remapping of `0..len` onto `[0, len - 1]`.
///
/// Speeds drawn from `N(1, sigma^2)` at `knots + 2` evenly spaced points are
/// interpolated by a natural cubic spline, floored at a small positive speed
/// and integrated, then rescaled so the path ends exactly at `len - 1`.
pub fn warp_path<R: Rng + ?Sized>(len: usize, knots: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    if len < 2 {
        return (0..len).map(|t| t as f64).collect();
    }
    let last = (len - 1) as f64;
    let n_points = knots + 2;
    let xs: Vec<f64> = (0..n_points)
        .map(|j| last * j as f64 / (n_points - 1) as f64)
        .collect();
    let ys: Vec<f64> = if sigma == 0.0 {
        vec![1.0; n_points]
    } else {
        let n = normal(1.0, sigma);
        (0..n_points).map(|_| n.sample(rng)).collect()
    };
    let speed = natural_spline(&xs, &ys, (0..len).map(|t| t as f64));
    let mut path = Vec::with_capacity(len);
    path.push(0.0);
    for s in &speed[1..] {
        let prev = *path.last().expect("non-empty");
        path.push(prev + s.max(MIN_WARP_SPEED));
    }
    let norm = last / path[len - 1];
    for p in &mut path {
        *p *= norm;
    }
    path[len - 1] = last;
    path
}

/// Linear interpolation of every channel at the (fractional) positions.
pub fn resample(w: &[f64], channels: usize, positions: &[f64]) -> Vec<f64> {
    let len = w.len() / channels;
    let mut out = Vec::with_capacity(channels * positions.len());
    for ch in 0..channels {
        let x = &w[ch * len..(ch + 1) * len];
        for &p in positions {
            if len == 1 {
                out.push(x[0]);
                continue;
            }
            let i0 = (p.floor() as usize).min(len - 2);
            let frac = p - i0 as f64;
            out.push(x[i0] * (1.0 - frac) + x[i0 + 1] * frac);
        }
    }
    out
}

pub fn time_warp<R: Rng + ?Sized>(
    w: &[f64],
    channels: usize,
    knots: usize,
    sigma: f64,
    rng: &mut R,
) -> Vec<f64> {
    let len = w.len() / channels;
    let path = warp_path(len, knots, sigma, rng);
    resample(w, channels, &path)
}

pub type Rotation = [[f64; 3]; 3];

/// Matrix that re-expresses a vector in a frame rotated by `angle` about
/// `axis` (the transpose of the Rodrigues active rotation). A quarter turn
/// about z maps `(x, y, z)` to `(y, -x, z)`.
pub fn rotation_matrix(axis: [f64; 3], angle: f64) -> Rotation {
    let n = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
    let [x, y, z] = axis.map(|a| a / n);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [c + t * x * x, t * x * y + s * z, t * x * z - s * y],
        [t * x * y - s * z, c + t * y * y, t * y * z + s * x],
        [t * x * z + s * y, t * y * z - s * x, c + t * z * z],
    ]
}

/// Applies `rot` to every time step of a 3-channel window.
pub fn apply_rotation(w: &[f64], len: usize, rot: &Rotation) -> Vec<f64> {
    let mut out = vec![0.0; 3 * len];
    for t in 0..len {
        let v = [w[t], w[len + t], w[2 * len + t]];
        for (r, row) in rot.iter().enumerate() {
            out[r * len + t] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        }
    }
    out
}

/// Rotation about a uniformly random axis by an angle uniform in
/// `[0, max_angle]`.
pub fn rotate<R: Rng + ?Sized>(
    w: &[f64],
    channels: usize,
    max_angle: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if channels != 3 {
        return Err(Error::UnsupportedChannels(channels));
    }
    if max_angle == 0.0 {
        return Ok(w.to_vec());
    }
    let axis = loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        if v.iter().map(|a| a * a).sum::<f64>() > 1e-18 {
            break v;
        }
    };
    let angle = rng.random_range(0.0..=max_angle);
    Ok(apply_rotation(w, w.len() / 3, &rotation_matrix(axis, angle)))
}

fn apply_kind<R: Rng + ?Sized>(
    kind: AugmentKind,
    w: &[f64],
    channels: usize,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(match kind {
        AugmentKind::Jitter => jitter(w, cfg.jitter_sigma, rng),
        AugmentKind::Scale => scale(w, channels, cfg.scale_sigma, rng),
        AugmentKind::TimeWarp => time_warp(w, channels, cfg.warp_knots, cfg.warp_sigma, rng),
        AugmentKind::Rotate => rotate(w, channels, cfg.rotation_max_angle, rng)?,
    })
}

/// Augments one instance according to the policy. Returns the chosen kind
/// under `PickOneUniform`, `None` under `ComposeAll`.
pub fn augment_instance<R: Rng + ?Sized>(
    w: &[f64],
    channels: usize,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, Option<AugmentKind>)> {
    match cfg.policy {
        AugmentPolicy::PickOneUniform => {
            let kind = AugmentKind::ALL[rng.random_range(0..4)];
            Ok((apply_kind(kind, w, channels, cfg, rng)?, Some(kind)))
        }
        AugmentPolicy::ComposeAll => {
            let mut out = w.to_vec();
            for kind in AugmentKind::ALL {
                out = apply_kind(kind, &out, channels, cfg, rng)?;
            }
            Ok((out, None))
        }
    }
}

/// Builds `x^aug` for a batch. One key is drawn from `rng`; instance `i` then
/// uses its own counter-derived stream, so the result does not depend on how
/// instances are scheduled across threads.
pub fn make_augmented_view(
    batch: &[&[f64]],
    channels: usize,
    cfg: &AugmentConfig,
    rng: &mut ChaCha8Rng,
    exec: Exec,
) -> Result<Vec<(Vec<f64>, Option<AugmentKind>)>> {
    let key: u64 = rng.random();
    exec.map(batch, |i, w| {
        let mut r = rng::stream(key ^ cfg.rng_seed, "augment", &[i as u64]);
        augment_instance(w, channels, cfg, &mut r)
    })
    .into_iter()
    .collect()
}
