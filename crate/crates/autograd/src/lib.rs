//! Reverse-mode automatic differentiation for small convolutional networks.
//!
//! A [`Graph`] is a tape: every operation runs immediately on dense
//! [`Tensor`]s and records enough to replay its adjoint. Calling
//! [`Graph::backward`] on a scalar node walks the tape in reverse.
//!
//! The op set is deliberately narrow (convolution, pooling, bilinear
//! upsampling, pointwise activations, Sobel stencils, and a few losses) and
//! runs single-threaded, so results are bit-reproducible for a fixed input.

mod conv;
mod graph;
mod scalar;
mod tensor;

pub use conv::{ConvGeom, SOBEL_X, SOBEL_Y};
pub use graph::{Grads, Graph, Var};
pub use scalar::Scalar;
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("shape error: {0}")]
    Shape(String),
}
