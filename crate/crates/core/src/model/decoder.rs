use rand::Rng;

use super::{adopt, check_len, NetSpec};
use crate::error::Result;
use crate::nn::{Activation, ConvTranspose1d, Linear, ParamSet};
use crate::par::Exec;

/// Linear expansion to the trunk's feature map followed by transposed
/// convolutions that mirror the encoder lengths back to the window shape.
/// The final layer is linear and produces the Gaussian mean.
#[derive(Clone, Debug)]
pub struct Decoder {
    spec: NetSpec,
    params: ParamSet,
    fc: Linear,
    tconvs: Vec<ConvTranspose1d>,
}

#[derive(Clone, Debug)]
pub struct DecoderTrace {
    z: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl DecoderTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().unwrap()
    }
}

impl Decoder {
    pub fn new<R: Rng + ?Sized>(spec: &NetSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut params = ParamSet::new();
        let lengths = spec.lengths();
        let channels = spec.channels();
        let n = spec.conv_blocks.len();
        // with no conv blocks the linear layer maps straight to the window
        let fc = Linear::new(&mut params, "fc", spec.latent_dim, spec.feature_len(), rng);
        let tconvs = (0..n)
            .rev()
            .enumerate()
            .map(|(j, i)| {
                let b = &spec.conv_blocks[i];
                ConvTranspose1d::new(
                    &mut params,
                    &format!("tconv{j}"),
                    channels[i + 1],
                    channels[i],
                    b.kernel,
                    b.stride,
                    b.padding(),
                    lengths[i + 1],
                    lengths[i],
                    rng,
                )
            })
            .collect();
        params.quantize_f32();
        Ok(Self { spec: spec.clone(), params, fc, tconvs })
    }

    pub fn from_params(spec: &NetSpec, params: ParamSet) -> Result<Self> {
        let mut dec = Self::new(spec, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0))?;
        adopt(&mut dec.params, params, "decoder")?;
        Ok(dec)
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

    fn layer_activation(&self, layer: usize) -> Activation {
        // layer 0 is the linear expansion, the last layer stays linear
        if layer == self.tconvs.len() {
            Activation::Identity
        } else {
            self.spec.activation
        }
    }

    pub fn forward(&self, z: &[f64]) -> DecoderTrace {
        let p = self.params.values();
        let mut pre = Vec::with_capacity(self.tconvs.len() + 1);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.tconvs.len() + 1);
        let a = self.fc.forward(p, z);
        post.push(self.layer_activation(0).forward(&a));
        pre.push(a);
        for (j, t) in self.tconvs.iter().enumerate() {
            let a = t.forward(p, post.last().unwrap());
            post.push(self.layer_activation(j + 1).forward(&a));
            pre.push(a);
        }
        DecoderTrace { z: z.to_vec(), pre, post }
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. `z`.
    pub fn backward(&self, t: &DecoderTrace, g_out: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let p = self.params.values();
        let mut g = g_out.to_vec();
        for j in (0..self.tconvs.len()).rev() {
            let g_pre = self.layer_activation(j + 1).backward(&t.pre[j + 1], &t.post[j + 1], &g);
            g = self.tconvs[j].backward(p, &t.post[j], &g_pre, grads);
        }
        let g_pre = self.layer_activation(0).backward(&t.pre[0], &t.post[0], &g);
        self.fc.backward(p, &t.z, &g_pre, grads)
    }

    pub fn decode(&self, zs: &[Vec<f64>], exec: Exec) -> Result<Vec<Vec<f64>>> {
        for z in zs {
            check_len("decoder input", z.len(), self.spec.latent_dim)?;
        }
        Ok(exec.map(zs, |_, z| self.forward(z).post.pop().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn output_matches_window_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dec = Decoder::new(&NetSpec::default(), &mut rng).unwrap();
        let z = vec![0.3; 64];
        let out = dec.decode(&[z.clone(), z], Exec::Parallel).unwrap();
        assert_eq!(out[0].len(), 300);
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn odd_lengths_mirror_exactly() {
        let mut spec = NetSpec::tiny();
        spec.window_size = 23;
        spec.conv_blocks = vec![super::super::ConvBlock::new(3, 5, 2), super::super::ConvBlock::new(4, 3, 3)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dec = Decoder::new(&spec, &mut rng).unwrap();
        assert_eq!(dec.forward(&[0.1; 4]).output().len(), 3 * 23);
    }
}
