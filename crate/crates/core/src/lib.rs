//! Ternary momentum neurons and canonical signed spike coding.
//!
//! The crate converts a trained ReLU network into a spiking network whose
//! neurons emit ternary spikes weighted by powers of two, and provides the
//! tools to calibrate, simulate and analyse the result.

pub mod analysis;
pub mod conversion;
pub mod encoding;
pub mod error;
pub mod neuron;
pub mod tensor;

pub use encoding::{encode_constant, CssCodec};
pub use error::{Error, Result};
pub use neuron::{Spike, SpikeTensor, SpikeTrain, TmnConfig, TmnState};
pub use tensor::Tensor;
