//! Flat parameter storage and the layer primitives the networks are built
//! from. Layers only hold offsets into a [`ParamSet`]; forward and backward
//! passes work on one instance at a time and accumulate gradients into a
//! caller-owned buffer laid out like the parameters.

mod layers;
mod params;

pub use layers::{Activation, Conv1d, ConvTranspose1d, Linear};
pub use params::{ParamSet, TensorEntry};
