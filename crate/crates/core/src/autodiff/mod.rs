//! Tensor engine with tape-based reverse-mode differentiation.
//!
//! Covers exactly the kernels the 1-D VGG regressors need: conv1d, dense,
//! relu, max pooling, flatten, element-wise add/mul, strided subsampling and
//! the MSE / cross-entropy losses.

mod kernels;
mod tape;
mod tensor;

use thiserror::Error;

pub use kernels::Conv1dDims;
pub use tape::{Tape, Var};
pub use tensor::{Scalar, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape contract violated: {0}")]
    Shape(String),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
}
