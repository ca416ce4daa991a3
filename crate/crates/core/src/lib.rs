//! Variational contrastive multi-source domain adaptation for wearable
//! accelerometer time series.
//!
//! The crate is organized along the pipeline:
//!
//! - [`data`]: dataset adapters, windowing, stratified splits, per-domain
//!   standardization, synthetic shifted domains and the on-disk scenario bundle.
//! - [`augment`]: jitter, scaling, time warping and rotation, plus the policy
//!   that builds the augmented view of a batch.
//! - [`model`]: probabilistic encoder, decoder, projection head and
//!   classifier with hand-written backward passes, plus checkpoints.
//! - [`losses`]: reconstruction, KL, NT-Xent, supervised contrastive and the
//!   two-view classifier cross-entropy, each with its gradient.
//! - [`trainer`]: VAE + contrastive pretraining, frozen-encoder classifier
//!   training, the source-only baseline and prediction.
//! - [`eval`]: micro-F1, the multi-seed task runner and report rendering.
//! - [`config`]: layered TOML experiment configuration.
//! - [`manifest`]: run manifests with content hashes of every input.
//!
//! Batch work is data-parallel through [`Exec`]; with the `parallel` feature
//! disabled every [`Exec`] runs sequentially. Both paths reduce gradients in the
//! same fixed chunk order, so results are bit-identical either way.

pub mod augment;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod losses;
pub mod manifest;
pub mod model;
pub mod nn;
pub mod optim;
mod par;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use par::Exec;
