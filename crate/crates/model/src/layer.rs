//! One encoder layer: temporal attention, optional channel attention through
//! the same projection storage, position-wise feed-forward. Post-norm
//! residual wiring throughout, dropout on each sublayer output in training.

use tsfm_core::{Element, Result, Rng, Tensor};

use crate::attention::{multi_head_attention, AttentionParams};
use crate::config::ModelConfig;

/// Gamma/beta pair of one layer normalization.
pub struct NormParams<E: Element> {
    pub gamma: Tensor<E>,
    pub beta: Tensor<E>,
}

impl<E: Element> NormParams<E> {
    pub fn init(d: usize) -> Self {
        NormParams {
            gamma: Tensor::full(&[d], E::one()).expect("finite").require_grad(),
            beta: Tensor::zeros(&[d]).require_grad(),
        }
    }
}

/// Forward-pass mode: training threads an RNG through for dropout masks.
pub enum Pass<'r> {
    Train { rng: &'r mut Rng },
    Eval,
}

fn dropout<E: Element>(x: &Tensor<E>, p: f64, pass: &mut Pass<'_>) -> Result<Tensor<E>> {
    match pass {
        Pass::Train { rng } if p > 0.0 => {
            let keep = E::of_f64(1.0 / (1.0 - p));
            let mask: Vec<E> = (0..x.numel())
                .map(|_| if rng.uniform() < p { E::zero() } else { keep })
                .collect();
            let mask = Tensor::from_vec(&x.shape(), mask)?;
            x.mul(&mask)
        }
        _ => Ok(x.clone()),
    }
}

/// Parameters of one encoder layer. Temporal and channel attention hold the
/// SAME `attn` tensors; there is deliberately no second parameter set.
pub struct EncoderLayer<E: Element> {
    pub attn: AttentionParams<E>,
    pub ffn_w1: Tensor<E>,
    pub ffn_w2: Tensor<E>,
    pub ln_temporal: NormParams<E>,
    pub ln_channel: NormParams<E>,
    pub ln_ffn: NormParams<E>,
}

impl<E: Element> EncoderLayer<E> {
    pub fn init(cfg: &ModelConfig, rng: &mut Rng) -> Self {
        let d = cfg.d_model;
        let b1 = 1.0 / (d as f64).sqrt();
        let b2 = 1.0 / (cfg.d_ff as f64).sqrt();
        EncoderLayer {
            attn: AttentionParams::init(d, rng),
            ffn_w1: Tensor::rand_uniform(&[d, cfg.d_ff], -b1, b1, rng).require_grad(),
            ffn_w2: Tensor::rand_uniform(&[cfg.d_ff, d], -b2, b2, rng).require_grad(),
            ln_temporal: NormParams::init(d),
            ln_channel: NormParams::init(d),
            ln_ffn: NormParams::init(d),
        }
    }

    /// x: [B, C, N, d] -> [B, C, N, d].
    pub fn forward(
        &self,
        x: &Tensor<E>,
        cfg: &ModelConfig,
        pass: &mut Pass<'_>,
    ) -> Result<Tensor<E>> {
        let eps = E::of_f64(cfg.eps_norm);

        // (1) attention over the patch axis, per (batch, channel)
        let t = multi_head_attention(x, &self.attn, cfg.n_heads)?;
        let t = dropout(&t, cfg.dropout, pass)?;
        let x = x
            .add(&t)?
            .layer_norm(&self.ln_temporal.gamma, &self.ln_temporal.beta, eps)?;

        // (2) the same attention parameters over the channel axis, per
        //     (batch, patch)
        let x = if cfg.channel_attention {
            let xt = x.transpose(&[0, 2, 1, 3])?; // [B, N, C, d]
            let c = multi_head_attention(&xt, &self.attn, cfg.n_heads)?
                .transpose(&[0, 2, 1, 3])?;
            let c = dropout(&c, cfg.dropout, pass)?;
            x.add(&c)?
                .layer_norm(&self.ln_channel.gamma, &self.ln_channel.beta, eps)?
        } else {
            x
        };

        // (3) position-wise feed-forward d -> d_ff -> d with GELU
        let shape = x.shape();
        let rows = x.numel() / cfg.d_model;
        let f = x
            .reshape(&[rows, cfg.d_model])?
            .matmul(&self.ffn_w1)?
            .gelu()?
            .matmul(&self.ffn_w2)?
            .reshape(&shape)?;
        let f = dropout(&f, cfg.dropout, pass)?;
        x.add(&f)?.layer_norm(&self.ln_ffn.gamma, &self.ln_ffn.beta, eps)
    }
}
