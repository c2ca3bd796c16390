//! Minimal dense-tensor engine with reverse-mode automatic differentiation,
//! covering exactly the operation set a patch-transformer needs: batched
//! matmul, softmax, layer norm, GELU, shape ops, and fused losses.
//!
//! Compute defaults to f32; gradient-check test mode runs the identical
//! code at f64. All randomness flows through the seeded [`rng::Rng`], and
//! any op that produces NaN/Inf fails immediately instead of letting the
//! values propagate.

pub mod error;
pub mod gradcheck;
mod kernels;
pub mod ops;
pub mod rng;
pub mod tensor;

pub use error::{Result, TensorError};
pub use gradcheck::{grad_check, GradCheckReport};
pub use ops::concat_lastaxis;
pub use rng::Rng;
pub use tensor::{no_grad, Element, NoGradGuard, Tensor};
