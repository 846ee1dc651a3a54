//! Minimal dense tensor kernel with reverse-mode differentiation.

mod adam;
mod gradcheck;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, grad_check_many, GradCheckReport};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("softmax mask row {row} has no active entry")]
    EmptyMask { row: usize },
    #[error("non-finite value produced by {op}")]
    NonFiniteValue { op: &'static str },
    #[error("{op} called with no inputs")]
    EmptyInput { op: &'static str },
    #[error("index {index} out of range for {op} (len {len})")]
    IndexOutOfRange { op: &'static str, index: usize, len: usize },
    #[error("backward requires a scalar output, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("{0}")]
    InvalidArgument(String),
}
