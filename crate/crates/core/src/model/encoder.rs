use rand::Rng;

use super::{adopt, check_len, NetSpec};
use crate::error::Result;
use crate::nn::{Conv1d, Linear, ParamSet};
use crate::par::Exec;

/// Convolutional trunk with two linear heads for the posterior mean and
/// log-variance.
#[derive(Clone, Debug)]
pub struct Encoder {
    spec: NetSpec,
    params: ParamSet,
    convs: Vec<Conv1d>,
    mu: Linear,
    log_var: Linear,
}

/// Activations of one encoder forward pass. `log_var` is the raw head output,
/// before clamping.
#[derive(Clone, Debug)]
pub struct EncoderTrace {
    x: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(spec: &NetSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut params = ParamSet::new();
        let lengths = spec.lengths();
        let channels = spec.channels();
        let convs = spec
            .conv_blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                Conv1d::new(
                    &mut params,
                    &format!("conv{i}"),
                    channels[i],
                    b.out_channels,
                    b.kernel,
                    b.stride,
                    b.padding(),
                    lengths[i],
                    rng,
                )
            })
            .collect();
        let feat = spec.feature_len();
        let mu = Linear::new(&mut params, "mu", feat, spec.latent_dim, rng);
        let log_var = Linear::new(&mut params, "log_var", feat, spec.latent_dim, rng);
        params.quantize_f32();
        Ok(Self { spec: spec.clone(), params, convs, mu, log_var })
    }

    pub fn from_params(spec: &NetSpec, params: ParamSet) -> Result<Self> {
        let mut enc = Self::new(spec, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0))?;
        adopt(&mut enc.params, params, "encoder")?;
        Ok(enc)
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Forward pass for one channel-major window.
    pub fn forward(&self, x: &[f64]) -> EncoderTrace {
        let p = self.params.values();
        let act = self.spec.activation;
        let mut pre = Vec::with_capacity(self.convs.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let input = post.last().map_or(x, Vec::as_slice);
            let a = conv.forward(p, input);
            post.push(act.forward(&a));
            pre.push(a);
        }
        let feat = post.last().map_or(x, Vec::as_slice);
        let mu = self.mu.forward(p, feat);
        let log_var = self.log_var.forward(p, feat);
        EncoderTrace { x: x.to_vec(), pre, post, mu, log_var }
    }

    /// Accumulates parameter gradients given gradients w.r.t. the mean and
    /// the raw log-variance head outputs.
    pub fn backward(&self, t: &EncoderTrace, g_mu: &[f64], g_log_var: &[f64], grads: &mut [f64]) {
        let p = self.params.values();
        let act = self.spec.activation;
        let feat = t.post.last().unwrap_or(&t.x);
        let mut g = self.mu.backward(p, feat, g_mu, grads);
        let g2 = self.log_var.backward(p, feat, g_log_var, grads);
        for (a, b) in g.iter_mut().zip(&g2) {
            *a += b;
        }
        for i in (0..self.convs.len()).rev() {
            let g_pre = act.backward(&t.pre[i], &t.post[i], &g);
            let input = if i == 0 { &t.x } else { &t.post[i - 1] };
            g = self.convs[i].backward(p, input, &g_pre, grads);
        }
    }

    /// Posterior parameters for a batch; log-variances are returned raw.
    pub fn encode(&self, batch: &[&[f64]], exec: Exec) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        for x in batch {
            check_len("encoder input", x.len(), self.spec.input_len())?;
        }
        let traces = exec.map(batch, |_, x| {
            let t = self.forward(x);
            (t.mu, t.log_var)
        });
        Ok(traces.into_iter().unzip())
    }
}
