use thiserror::Error;

/// Errors produced by tensor construction, operations, and backward passes.
#[derive(Debug, Error)]
pub enum TensorError {
    /// Two operand shapes are incompatible for the given op.
    #[error("{op}: shape mismatch: lhs {lhs:?}, rhs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// A single-operand dimension problem (bad axis, empty extent, ...).
    #[error("{op}: {msg}")]
    Dim { op: &'static str, msg: String },
    /// An op produced NaN or Inf. Training instability must be loud, so
    /// non-finite values abort the op instead of propagating.
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    /// Misuse of the autodiff graph (non-scalar loss, repeated backward, ...).
    #[error("backward: {0}")]
    Backward(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;
