//! Guide chapters, compiled as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/neuron.md")]
pub mod neuron {}
#[doc = include_str!("../../../book/src/css.md")]
pub mod css {}
#[doc = include_str!("../../../book/src/conversion.md")]
pub mod conversion {}
#[doc = include_str!("../../../book/src/analysis.md")]
pub mod analysis {}
#[doc = include_str!("../../../book/src/energy.md")]
pub mod energy {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
