//! The four networks of the pipeline: a probabilistic convolutional encoder,
//! a mirrored transposed-convolution decoder, a normalized projection head and
//! an MLP classifier. Each owns a [`ParamSet`]; forward passes return a trace
//! that the matching backward pass consumes.

mod checkpoint;
mod decoder;
mod encoder;
mod heads;
mod latent;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use decoder::{Decoder, DecoderTrace};
pub use encoder::{Encoder, EncoderTrace};
pub use heads::{argmax, Classifier, ClassifierTrace, Projector, ProjectorTrace};
pub use latent::{clamp_log_var, reparameterize, reparameterize_with, LatentSample, LOG_VAR_MAX, LOG_VAR_MIN};

use crate::error::{Error, Result};
use crate::nn::{Activation, Conv1d, ParamSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlock {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvBlock {
    pub const fn new(out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self { out_channels, kernel, stride }
    }

    /// "Same"-style padding for odd kernels.
    pub fn padding(&self) -> usize {
        (self.kernel - 1) / 2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSpec {
    pub latent_dim: usize,
    pub projection_dim: usize,
    pub conv_blocks: Vec<ConvBlock>,
    pub classifier_hidden: usize,
    pub n_classes: usize,
    pub in_channels: usize,
    pub window_size: usize,
    pub activation: Activation,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self {
            latent_dim: 64,
            projection_dim: 32,
            conv_blocks: vec![ConvBlock::new(32, 9, 2), ConvBlock::new(64, 9, 2), ConvBlock::new(128, 9, 2)],
            classifier_hidden: 128,
            n_classes: 2,
            in_channels: 3,
            window_size: 100,
            activation: Activation::Elu,
        }
    }
}

impl NetSpec {
    /// Small network for gradient checks and desk-scale runs.
    pub fn tiny() -> Self {
        Self {
            latent_dim: 4,
            projection_dim: 4,
            conv_blocks: vec![ConvBlock::new(4, 5, 2)],
            classifier_hidden: 8,
            n_classes: 3,
            in_channels: 3,
            window_size: 16,
            activation: Activation::Elu,
        }
    }

    /// Copy with the data-dependent fields filled in.
    pub fn for_data(&self, in_channels: usize, window_size: usize, n_classes: usize) -> Self {
        Self {
            in_channels,
            window_size,
            n_classes,
            ..self.clone()
        }
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.window_size
    }

    /// Sequence length after each encoder block, starting with the input.
    pub fn lengths(&self) -> Vec<usize> {
        let mut out = vec![self.window_size];
        for b in &self.conv_blocks {
            let last = *out.last().unwrap();
            out.push(Conv1d::output_len(last, b.kernel, b.stride, b.padding()).unwrap_or(0));
        }
        out
    }

    /// Channel count at each encoder stage, starting with the input.
    pub fn channels(&self) -> Vec<usize> {
        std::iter::once(self.in_channels)
            .chain(self.conv_blocks.iter().map(|b| b.out_channels))
            .collect()
    }

    /// Width of the flattened trunk output feeding the latent heads.
    pub fn feature_len(&self) -> usize {
        self.channels().last().unwrap() * self.lengths().last().unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("net.latent_dim", self.latent_dim),
            ("net.projection_dim", self.projection_dim),
            ("net.classifier_hidden", self.classifier_hidden),
            ("net.in_channels", self.in_channels),
            ("net.window_size", self.window_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.n_classes < 2 {
            return Err(Error::config(format!("net.n_classes must be at least 2, got {}", self.n_classes)));
        }
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.out_channels == 0 || b.kernel == 0 || b.stride == 0 {
                return Err(Error::config(format!("net.conv_blocks[{i}] has a zero field")));
            }
        }
        if let Some(i) = self.lengths().iter().position(|&l| l == 0) {
            return Err(Error::config(format!(
                "net.conv_blocks[{}] shrinks a window of {} steps to nothing",
                i - 1,
                self.window_size
            )));
        }
        Ok(())
    }
}

/// All four networks built from one [`NetSpec`].
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub projector: Projector,
    pub classifier: Classifier,
}

impl ModelParams {
    pub fn new<R: Rng + ?Sized>(spec: &NetSpec, rng: &mut R) -> Result<Self> {
        Ok(Self {
            encoder: Encoder::new(spec, rng)?,
            decoder: Decoder::new(spec, rng)?,
            projector: Projector::new(spec, rng)?,
            classifier: Classifier::new(spec, rng)?,
        })
    }
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::shape(format!("{what}: expected {want} values, got {got}")))
    }
}

/// Replaces freshly initialized parameters with loaded ones after checking
/// that the tensor layout matches.
pub(crate) fn adopt(own: &mut ParamSet, loaded: ParamSet, what: &str) -> Result<()> {
    if !own.same_layout(&loaded) {
        return Err(Error::shape(format!("{what} parameters do not match the network layout")));
    }
    *own = loaded;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lengths_and_features() {
        let s = NetSpec::default();
        assert_eq!(s.lengths(), vec![100, 50, 25, 13]);
        assert_eq!(s.feature_len(), 128 * 13);
        s.validate().unwrap();
        assert_eq!(NetSpec::tiny().lengths(), vec![16, 8]);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut s = NetSpec::tiny();
        s.n_classes = 1;
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        let mut s = NetSpec::tiny();
        s.window_size = 1;
        s.conv_blocks = vec![ConvBlock::new(2, 6, 1)];
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        let mut s = NetSpec::tiny();
        s.latent_dim = 0;
        assert!(s.validate().is_err());
    }
}
