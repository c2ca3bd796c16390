//! Dual-attention patch transformer for multivariate time-series windows.
//!
//! The encoder attends twice per layer with one parameter set: over the
//! patch axis within each channel, then (after a transpose) over the
//! channel axis within each patch position. Inputs are instance-normalized
//! per window and channel, cut into non-overlapping patches, and projected
//! to the model width with a fixed sinusoidal positional table.

use thiserror::Error;

pub mod attention;
pub mod config;
pub mod layer;
pub mod model;
pub mod norm;
pub mod posenc;

pub use attention::{attention, attention_weights, multi_head_attention, AttentionParams};
pub use config::ModelConfig;
pub use layer::{EncoderLayer, NormParams, Pass};
pub use model::Model;
pub use norm::{instance_normalize, ChannelStats};
pub use posenc::positional_encoding;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] tsfm_core::TensorError),
}
