//! Architecture hyperparameters, named presets, and the analytic
//! parameter-count formula.

use serde::{Deserialize, Serialize};

use crate::ModelError;

/// Hyperparameters of the encoder plus heads.
///
/// Conventions baked in here: post-norm residual layout, GELU feed-forward
/// of width `d_ff` (4x the model width in the presets), one head per 32
/// model dimensions in the presets, sinusoidal positional encoding along
/// the patch axis only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of input channels C.
    pub channels: usize,
    /// Window length L.
    pub window_len: usize,
    /// Patch size P; must divide L.
    pub patch_size: usize,
    /// Model width d; must be divisible by `n_heads` and even.
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    /// Feed-forward width.
    pub d_ff: usize,
    /// Number of degradation classes K.
    pub n_classes: usize,
    /// Dropout rate applied after each sublayer during training.
    pub dropout: f64,
    /// Ablation flag: when false the channel-attention sublayer is skipped
    /// (parameter shapes are unchanged).
    pub channel_attention: bool,
    /// Masking ratio used by pretraining.
    pub mask_ratio: f64,
    /// Epsilon for instance and layer normalization.
    pub eps_norm: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: 9,
            window_len: 512,
            patch_size: 16,
            d_model: 256,
            n_layers: 4,
            n_heads: 8,
            d_ff: 1024,
            n_classes: 4,
            dropout: 0.1,
            channel_attention: true,
            mask_ratio: 0.30,
            eps_norm: 1e-5,
        }
    }
}

impl ModelConfig {
    /// Named presets: "3M16P", "3M8P", "3M4P" (4 layers, d=256) and
    /// "25M16P" (8 layers, d=512). The number is the rough parameter count.
    pub fn preset(name: &str) -> Option<ModelConfig> {
        let base = ModelConfig::default();
        match name {
            "3M16P" => Some(base),
            "3M8P" => Some(ModelConfig { patch_size: 8, ..base }),
            "3M4P" => Some(ModelConfig { patch_size: 4, ..base }),
            "25M16P" => Some(ModelConfig {
                d_model: 512,
                n_layers: 8,
                n_heads: 16,
                d_ff: 2048,
                ..base
            }),
            _ => None,
        }
    }

    /// Number of patches N = L / P.
    pub fn n_patches(&self) -> usize {
        self.window_len / self.patch_size
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |msg: String| Err(ModelError::Config(msg));
        if self.channels == 0 || self.window_len == 0 || self.patch_size == 0 {
            return err("channels, window_len and patch_size must be positive".into());
        }
        if self.window_len % self.patch_size != 0 {
            return err(format!(
                "patch_size {} does not divide window_len {}",
                self.patch_size, self.window_len
            ));
        }
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return err(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.d_model % 2 != 0 {
            return err(format!("d_model {} must be even for sinusoidal encoding", self.d_model));
        }
        if self.n_classes < 2 {
            return err(format!("n_classes {} must be >= 2", self.n_classes));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err(format!("dropout {} must be in [0, 1)", self.dropout));
        }
        if !(0.0..=1.0).contains(&self.mask_ratio) {
            return err(format!("mask_ratio {} must be in [0, 1]", self.mask_ratio));
        }
        if self.eps_norm <= 0.0 {
            return err(format!("eps_norm {} must be positive", self.eps_norm));
        }
        Ok(())
    }

    /// Exact trainable parameter count:
    /// per layer 4*d^2 (attention) + 2*d*d_ff (FFN) + 3*2d (norms),
    /// plus patch projection (P*d + d), reconstruction head (d*P + P) and
    /// classification head (C*d*K + K). The positional table is fixed.
    pub fn count_params(&self) -> usize {
        let d = self.d_model;
        let per_layer = 4 * d * d + 2 * d * self.d_ff + 3 * 2 * d;
        let projection = self.patch_size * d + d;
        let recon = d * self.patch_size + self.patch_size;
        let classify = self.channels * d * self.n_classes + self.n_classes;
        self.n_layers * per_layer + projection + recon + classify
    }
}
