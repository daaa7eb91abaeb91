//! Dense tensors, a reverse-mode tape and a finite-difference oracle.

mod fd;
mod gemm;
mod rng;
mod tape;
mod tensor;

pub use fd::{finite_difference_gradient, relative_error};
pub use rng::SeededRng;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

/// Scalar type of the tensor engine.
#[cfg(not(feature = "f32"))]
pub type Real = f64;
#[cfg(feature = "f32")]
pub type Real = f32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("shape {shape:?} does not hold {len} elements")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },
    #[error("expected a scalar, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("{op}: axis {axis} out of range for shape {shape:?}")]
    InvalidAxis {
        op: &'static str,
        axis: usize,
        shape: Vec<usize>,
    },
    #[error("{op}: index {index} out of range for axis of length {len}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
}
