use rand::Rng;

use super::{adopt, check_len, NetSpec};
use crate::error::Result;
use crate::nn::{Linear, ParamSet};
use crate::par::Exec;

/// Added to the norm before dividing so a zero vector maps to zero.
pub(crate) const NORM_EPS: f64 = 1e-12;

/// Two-layer MLP whose output rows are scaled to unit length.
#[derive(Clone, Debug)]
pub struct Projector {
    spec: NetSpec,
    params: ParamSet,
    fc1: Linear,
    fc2: Linear,
}

#[derive(Clone, Debug)]
pub struct ProjectorTrace {
    z: Vec<f64>,
    h_pre: Vec<f64>,
    h: Vec<f64>,
    u: Vec<f64>,
    norm: f64,
    pub r: Vec<f64>,
}

impl Projector {
    pub fn new<R: Rng + ?Sized>(spec: &NetSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut params = ParamSet::new();
        let fc1 = Linear::new(&mut params, "fc1", spec.latent_dim, spec.latent_dim, rng);
        let fc2 = Linear::new(&mut params, "fc2", spec.latent_dim, spec.projection_dim, rng);
        params.quantize_f32();
        Ok(Self { spec: spec.clone(), params, fc1, fc2 })
    }

    pub fn from_params(spec: &NetSpec, params: ParamSet) -> Result<Self> {
        let mut net = Self::new(spec, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0))?;
        adopt(&mut net.params, params, "projector")?;
        Ok(net)
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn forward(&self, z: &[f64]) -> ProjectorTrace {
        let p = self.params.values();
        let h_pre = self.fc1.forward(p, z);
        let h = self.spec.activation.forward(&h_pre);
        let u = self.fc2.forward(p, &h);
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r = u.iter().map(|v| v / (norm + NORM_EPS)).collect();
        ProjectorTrace { z: z.to_vec(), h_pre, h, u, norm, r }
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. `z`.
    pub fn backward(&self, t: &ProjectorTrace, g_r: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let p = self.params.values();
        let d = t.norm + NORM_EPS;
        let dot: f64 = t.u.iter().zip(g_r).map(|(a, b)| a * b).sum();
        let coef = if t.norm > 0.0 { dot / (d * d * t.norm) } else { 0.0 };
        let g_u: Vec<f64> = g_r.iter().zip(&t.u).map(|(g, u)| g / d - u * coef).collect();
        let g_h = self.fc2.backward(p, &t.h, &g_u, grads);
        let g_h_pre = self.spec.activation.backward(&t.h_pre, &t.h, &g_h);
        self.fc1.backward(p, &t.z, &g_h_pre, grads)
    }

    pub fn project(&self, zs: &[Vec<f64>], exec: Exec) -> Result<Vec<Vec<f64>>> {
        for z in zs {
            check_len("projector input", z.len(), self.spec.latent_dim)?;
        }
        Ok(exec.map(zs, |_, z| self.forward(z).r))
    }
}

/// Two-layer MLP producing unnormalized class logits.
#[derive(Clone, Debug)]
pub struct Classifier {
    spec: NetSpec,
    params: ParamSet,
    fc1: Linear,
    fc2: Linear,
}

#[derive(Clone, Debug)]
pub struct ClassifierTrace {
    z: Vec<f64>,
    h_pre: Vec<f64>,
    h: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Classifier {
    pub fn new<R: Rng + ?Sized>(spec: &NetSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut params = ParamSet::new();
        let fc1 = Linear::new(&mut params, "fc1", spec.latent_dim, spec.classifier_hidden, rng);
        let fc2 = Linear::new(&mut params, "fc2", spec.classifier_hidden, spec.n_classes, rng);
        params.quantize_f32();
        Ok(Self { spec: spec.clone(), params, fc1, fc2 })
    }

    pub fn from_params(spec: &NetSpec, params: ParamSet) -> Result<Self> {
        let mut net = Self::new(spec, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0))?;
        adopt(&mut net.params, params, "classifier")?;
        Ok(net)
    }

    pub fn n_classes(&self) -> usize {
        self.spec.n_classes
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn forward(&self, z: &[f64]) -> ClassifierTrace {
        let p = self.params.values();
        let h_pre = self.fc1.forward(p, z);
        let h = self.spec.activation.forward(&h_pre);
        let logits = self.fc2.forward(p, &h);
        ClassifierTrace { z: z.to_vec(), h_pre, h, logits }
    }

    pub fn backward(&self, t: &ClassifierTrace, g_logits: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let p = self.params.values();
        let g_h = self.fc2.backward(p, &t.h, g_logits, grads);
        let g_h_pre = self.spec.activation.backward(&t.h_pre, &t.h, &g_h);
        self.fc1.backward(p, &t.z, &g_h_pre, grads)
    }

    pub fn classify(&self, zs: &[Vec<f64>], exec: Exec) -> Result<Vec<Vec<f64>>> {
        for z in zs {
            check_len("classifier input", z.len(), self.spec.latent_dim)?;
        }
        Ok(exec.map(zs, |_, z| self.forward(z).logits))
    }
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}
