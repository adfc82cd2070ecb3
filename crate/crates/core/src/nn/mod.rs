//! Minimal neural-network engine: tensors, a fixed set of layers with
//! explicit backward rules, losses and SGD.

mod layers;
mod loss;
mod network;
mod tensor;

pub use layers::{relu, sigmoid_act, softmax, tanh_act, Layer, LayerSpec, Mode};
pub use loss::{loss_bce, loss_mse, loss_sparse_ce, row_mse, BCE_EPS};
pub use network::{sgd_step, GradientTape, Sequential, Sgd};
pub use tensor::{Scalar, Tensor};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("{context}: shape mismatch (expected {expected}, found {found})")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },
    #[error("kernel width {kernel} exceeds input length {length}")]
    KernelTooWide { kernel: usize, length: usize },
    #[error("backward called before forward")]
    CalledBeforeForward,
    #[error("non-finite values in layer {layer} during {pass}")]
    NonFinite { layer: usize, pass: &'static str },
    #[error("missing parameter tensor {0}")]
    MissingParameter(String),
}
