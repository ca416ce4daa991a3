//! Desk-scale stand-in for real cross-domain sensor data.
//!
//! Each class is a set of per-channel sinusoids. Each domain sees those
//! waveforms through its own rotation, gain and additive noise, the same kinds
//! of nuisance that separate body positions, people and devices.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{split, DomainDataset, SensorWindow, SplitRatios, CHANNELS};
use crate::augment::{apply_rotation, rotation_matrix};
use crate::error::{Error, Result};
use crate::rng;

/// Base waveform of one class: a sinusoid per channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWaveform {
    /// Cycles per window.
    pub frequency: f64,
    pub amplitude: [f64; 3],
    /// Per-channel phase offset in radians.
    pub phase: [f64; 3],
    /// Amplitude of a second harmonic added to every channel.
    #[serde(default)]
    pub harmonic: f64,
}

/// Nuisance transform applied to every window of one domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainShift {
    pub rotation_axis: [f64; 3],
    /// Radians.
    pub rotation_angle: f64,
    pub gain: f64,
    pub noise: f64,
}

impl DomainShift {
    pub fn identity() -> Self {
        Self {
            rotation_axis: [0.0, 0.0, 1.0],
            rotation_angle: 0.0,
            gain: 1.0,
            noise: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticShiftModel {
    pub classes: Vec<ClassWaveform>,
    pub domains: Vec<DomainShift>,
    pub samples_per_class_per_domain: usize,
    pub window_size: usize,
    /// Std of the per-sample amplitude factor drawn around 1.
    #[serde(default = "default_amplitude_jitter")]
    pub amplitude_jitter: f64,
    pub rng_seed: u64,
}

fn default_amplitude_jitter() -> f64 {
    0.1
}

impl SyntheticShiftModel {
    /// The desk-scale scenario used by the acceptance suite: three domains
    /// (rotations of 30 to 60 degrees about random axes, gains in [0.8, 1.2]),
    /// four classes, 50 windows per class per domain.
    pub fn desk_scale(seed: u64, window_size: usize) -> Self {
        Self::random(3, 4, 50, window_size, seed)
    }

    /// Random class waveforms and domain shifts drawn from `seed`.
    pub fn random(
        n_domains: usize,
        n_classes: usize,
        samples_per_class_per_domain: usize,
        window_size: usize,
        seed: u64,
    ) -> Self {
        let mut r = rng::stream(seed, "synthetic-model", &[]);
        let classes = (0..n_classes)
            .map(|c| {
                // even classes oscillate along a line, odd ones trace a circle;
                // each pair of classes shares a frequency
                let u = random_unit_vector(&mut r);
                let v = orthogonal_unit(u, &mut r);
                let circular = c % 2 == 1;
                let mut amplitude = [0.0; 3];
                let mut phase = [0.0; 3];
                for k in 0..3 {
                    let (a, b) = if circular { (u[k], v[k]) } else { (u[k], 0.0) };
                    amplitude[k] = a.hypot(b);
                    phase[k] = b.atan2(a);
                }
                ClassWaveform {
                    frequency: 2.0 + 1.5 * (c / 2) as f64,
                    amplitude,
                    phase,
                    harmonic: 0.0,
                }
            })
            .collect();
        let domains = (0..n_domains)
            .map(|_| DomainShift {
                rotation_axis: random_unit_vector(&mut r),
                rotation_angle: r.random_range(PI / 6.0..=PI / 3.0),
                gain: r.random_range(0.8..=1.2),
                noise: 0.1,
            })
            .collect();
        Self {
            classes,
            domains,
            samples_per_class_per_domain,
            window_size,
            amplitude_jitter: default_amplitude_jitter(),
            rng_seed: seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() || self.classes.len() < 2 {
            return Err(Error::config(
                "synthetic model needs at least one domain and two classes",
            ));
        }
        if self.samples_per_class_per_domain < 3 {
            return Err(Error::config(
                "synthetic.samples_per_class_per_domain must be at least 3",
            ));
        }
        if self.window_size < 2 {
            return Err(Error::config("synthetic.window_size must be at least 2"));
        }
        for d in &self.domains {
            let norm = d.rotation_axis.iter().map(|a| a * a).sum::<f64>().sqrt();
            if !(d.gain > 0.0) || !(d.noise >= 0.0) || !(norm > 0.0) {
                return Err(Error::config(
                    "synthetic domains need gain > 0, noise >= 0 and a non-zero rotation axis",
                ));
            }
        }
        if !(self.amplitude_jitter >= 0.0) {
            return Err(Error::config("synthetic.amplitude_jitter must be >= 0"));
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.classes.len()).map(|c| format!("c{c}")).collect()
    }

    /// The unshifted waveform of sample `sample` of class `class`. The random
    /// draws depend only on (seed, class, sample), so matching samples share
    /// the same base signal in every domain.
    pub fn base_window(&self, class: usize, sample: usize) -> Vec<f64> {
        let wf = &self.classes[class];
        let mut r = rng::stream(self.rng_seed, "synthetic-base", &[class as u64, sample as u64]);
        let start: f64 = r.random_range(0.0..TAU);
        let scale = if self.amplitude_jitter > 0.0 {
            Normal::new(1.0, self.amplitude_jitter)
                .expect("std checked by validate")
                .sample(&mut r)
        } else {
            1.0
        };
        let n = self.window_size;
        let mut out = vec![0.0; CHANNELS * n];
        for ch in 0..CHANNELS {
            for t in 0..n {
                let angle = TAU * wf.frequency * t as f64 / n as f64 + start + wf.phase[ch];
                out[ch * n + t] =
                    scale * (wf.amplitude[ch] * angle.sin() + wf.harmonic * (2.0 * angle).sin());
            }
        }
        out
    }

    /// Base waveform passed through the domain's rotation, gain and noise.
    pub fn shifted_window(&self, domain: usize, class: usize, sample: usize) -> Vec<f64> {
        let shift = &self.domains[domain];
        let base = self.base_window(class, sample);
        let rot = rotation_matrix(shift.rotation_axis, shift.rotation_angle);
        let mut out = apply_rotation(&base, self.window_size, &rot);
        let mut r = rng::stream(
            self.rng_seed,
            "synthetic-noise",
            &[domain as u64, class as u64, sample as u64],
        );
        let noise = (shift.noise > 0.0).then(|| Normal::new(0.0, shift.noise).expect("noise >= 0"));
        for v in &mut out {
            *v *= shift.gain;
            if let Some(n) = &noise {
                *v += n.sample(&mut r);
            }
        }
        out
    }
}

/// A unit vector orthogonal to `u`.
fn orthogonal_unit<R: Rng>(u: [f64; 3], r: &mut R) -> [f64; 3] {
    loop {
        let w = random_unit_vector(r);
        let d = w[0] * u[0] + w[1] * u[1] + w[2] * u[2];
        let v = [w[0] - d * u[0], w[1] - d * u[1], w[2] - d * u[2]];
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-6 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn random_unit_vector<R: Rng>(r: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rand_distr::StandardNormal.sample(r),
            rand_distr::StandardNormal.sample(r),
            rand_distr::StandardNormal.sample(r),
        ];
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-9 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Builds one fully labeled, split (but not standardized) domain per shift.
/// Domain ids are `d0`, `d1`, ...; the caller picks the target.
pub fn generate_synthetic(model: &SyntheticShiftModel) -> Result<Vec<DomainDataset>> {
    model.validate()?;
    let names = model.class_names();
    (0..model.domains.len())
        .map(|d| {
            let id = format!("d{d}");
            let mut windows = Vec::with_capacity(model.classes.len() * model.samples_per_class_per_domain);
            for c in 0..model.classes.len() {
                for s in 0..model.samples_per_class_per_domain {
                    let w = SensorWindow::new(model.shifted_window(d, c, s), CHANNELS, Some(c as u16), &id)?
                        .with_meta("device", id.clone())
                        .with_meta("sample", s.to_string());
                    windows.push(w);
                }
            }
            let [train, val, test] =
                split(windows, SplitRatios::default(), model.rng_seed ^ d as u64, &names)?;
            DomainDataset::labeled(id, names.clone(), train, val, test)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    fn all_windows(d: &DomainDataset) -> Vec<&SensorWindow> {
        Split::ALL.iter().flat_map(|&s| d.split(s)).collect()
    }

    #[test]
    fn counts_by_construction() {
        let m = SyntheticShiftModel::random(3, 4, 50, 32, 1);
        let ds = generate_synthetic(&m).unwrap();
        assert_eq!(ds.len(), 3);
        for d in &ds {
            assert_eq!(d.len(), 200);
            assert_eq!(d.class_set.len(), 4);
        }
    }

    #[test]
    fn identity_shift_reproduces_base_waveforms() {
        let mut m = SyntheticShiftModel::random(1, 3, 5, 40, 9);
        m.domains[0] = DomainShift::identity();
        let ds = generate_synthetic(&m).unwrap();
        for w in all_windows(&ds[0]) {
            let sample: usize = w.meta["sample"].parse().unwrap();
            let base = m.base_window(w.label().unwrap() as usize, sample);
            assert_eq!(w.values, base);
        }
    }

    #[test]
    fn rotation_only_domains_share_per_step_norms() {
        let mut m = SyntheticShiftModel::random(2, 2, 4, 30, 3);
        for d in &mut m.domains {
            d.gain = 1.0;
            d.noise = 0.0;
        }
        m.domains[1].rotation_angle = 1.1;
        let n = m.window_size;
        for c in 0..2 {
            for s in 0..4 {
                let a = m.shifted_window(0, c, s);
                let b = m.shifted_window(1, c, s);
                for t in 0..n {
                    let na: f64 = (0..3).map(|ch| a[ch * n + t].powi(2)).sum::<f64>().sqrt();
                    let nb: f64 = (0..3).map(|ch| b[ch * n + t].powi(2)).sum::<f64>().sqrt();
                    assert!((na - nb).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let m = SyntheticShiftModel::desk_scale(4, 24);
        let a = generate_synthetic(&m).unwrap();
        let b = generate_synthetic(&m).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for s in Split::ALL {
                assert_eq!(x.split(s), y.split(s));
            }
        }
    }

    #[test]
    fn desk_scale_shift_ranges() {
        let m = SyntheticShiftModel::desk_scale(11, 32);
        for d in &m.domains {
            assert!((PI / 6.0..=PI / 3.0).contains(&d.rotation_angle));
            assert!((0.8..=1.2).contains(&d.gain));
        }
    }
}
