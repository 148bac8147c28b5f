//! Reverse-mode automatic differentiation over a tape of NCHW tensors.
//!
//! The engine implements only what the face autoencoders and their losses
//! need: strided "same" convolutions, dense layers, a couple of activations,
//! sub-pixel upsampling, channel concatenation, elementwise arithmetic and a
//! handful of reductions. Every op has a hand-written backward rule that is
//! verified against central finite differences in `f64`.
//!
//! A [`Graph`] is built fresh for every forward pass. Trainable tensors live
//! in a [`ParamStore`] and are bound into a graph with [`Graph::param`]; a
//! parameter bound twice resolves to the same node, so weight sharing
//! accumulates gradients from every use.

mod error;
mod gradcheck;
mod graph;
mod kernels;
mod params;
mod scalar;
mod tensor;

pub use error::{AutogradError, Result};
pub use gradcheck::{gradcheck, GradcheckOptions, GradcheckReport};
pub use graph::{Gradients, Graph, Var};
pub use params::{ParamId, ParamStore};
pub use scalar::Scalar;
pub use tensor::Tensor;
