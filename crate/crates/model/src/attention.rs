//! Scaled dot-product attention and the shared-parameter multi-head form.
//!
//! One `AttentionParams` set serves both the temporal and the channel
//! sublayer of an encoder layer: callers hand in token tensors with
//! different leading axes and the same four projection matrices (the same
//! storage, not copies) are applied.

use tsfm_core::{Element, Result, Rng, Tensor, TensorError};

/// Q/K/V/output projections, each `[d, d]`, no biases.
pub struct AttentionParams<E: Element> {
    pub wq: Tensor<E>,
    pub wk: Tensor<E>,
    pub wv: Tensor<E>,
    pub wo: Tensor<E>,
}

impl<E: Element> AttentionParams<E> {
    pub fn init(d: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (d as f64).sqrt();
        let mut w = || Tensor::rand_uniform(&[d, d], -bound, bound, rng).require_grad();
        AttentionParams { wq: w(), wk: w(), wv: w(), wo: w() }
    }

    /// Same handles, shared storage.
    pub fn share(&self) -> Self {
        AttentionParams {
            wq: self.wq.clone(),
            wk: self.wk.clone(),
            wv: self.wv.clone(),
            wo: self.wo.clone(),
        }
    }
}

/// Row-stochastic attention weights softmax(Q K^T / sqrt(d_h)) applied to V.
/// Q, K, V are `[.., n_tok, d_h]` with identical leading extents.
pub fn attention<E: Element>(q: &Tensor<E>, k: &Tensor<E>, v: &Tensor<E>) -> Result<Tensor<E>> {
    let weights = attention_weights(q, k)?;
    weights.matmul(v)
}

/// The softmax(Q K^T / sqrt(d_h)) factor alone, `[.., n_tok, n_tok]`.
pub fn attention_weights<E: Element>(q: &Tensor<E>, k: &Tensor<E>) -> Result<Tensor<E>> {
    let rank = q.rank();
    if rank < 2 {
        return Err(TensorError::Dim {
            op: "attention",
            msg: format!("rank must be >= 2, got shape {:?}", q.shape()),
        });
    }
    let d_h = q.shape()[rank - 1];
    let mut swap: Vec<usize> = (0..rank).collect();
    swap.swap(rank - 1, rank - 2);
    let scores = q.matmul(&k.transpose(&swap)?)?;
    scores
        .mul_scalar(E::of_f64(1.0 / (d_h as f64).sqrt()))?
        .softmax_lastaxis()
}

fn head_split<E: Element>(
    x: &Tensor<E>,
    lead: &[usize],
    n_tok: usize,
    n_heads: usize,
    d_h: usize,
) -> Result<Tensor<E>> {
    // [rows, d] -> [lead.., n_tok, h, d_h] -> [lead.., h, n_tok, d_h]
    let mut shape = lead.to_vec();
    shape.extend([n_tok, n_heads, d_h]);
    let mut perm: Vec<usize> = (0..lead.len()).collect();
    perm.extend([lead.len() + 1, lead.len(), lead.len() + 2]);
    x.reshape(&shape)?.transpose(&perm)
}

/// Multi-head attention over the second-to-last axis of `x` (`[.., n_tok, d]`):
/// per-head projections through column blocks of W_Q/W_K/W_V, scaled
/// dot-product attention per head, concatenation, output projection W^o.
pub fn multi_head_attention<E: Element>(
    x: &Tensor<E>,
    params: &AttentionParams<E>,
    n_heads: usize,
) -> Result<Tensor<E>> {
    let shape = x.shape();
    let rank = shape.len();
    if rank < 2 {
        return Err(TensorError::Dim {
            op: "multi_head_attention",
            msg: format!("rank must be >= 2, got {shape:?}"),
        });
    }
    let (n_tok, d) = (shape[rank - 2], shape[rank - 1]);
    if n_heads == 0 || d % n_heads != 0 {
        return Err(TensorError::Dim {
            op: "multi_head_attention",
            msg: format!("d={d} not divisible by n_heads={n_heads}"),
        });
    }
    let d_h = d / n_heads;
    let lead = &shape[..rank - 2];
    let rows = x.numel() / d;

    let flat = x.reshape(&[rows, d])?;
    let q = head_split(&flat.matmul(&params.wq)?, lead, n_tok, n_heads, d_h)?;
    let k = head_split(&flat.matmul(&params.wk)?, lead, n_tok, n_heads, d_h)?;
    let v = head_split(&flat.matmul(&params.wv)?, lead, n_tok, n_heads, d_h)?;

    let per_head = attention(&q, &k, &v)?; // [lead.., h, n_tok, d_h]

    // [lead.., h, n_tok, d_h] -> [lead.., n_tok, h, d_h] -> [rows, d]
    let mut perm: Vec<usize> = (0..lead.len()).collect();
    perm.extend([lead.len() + 1, lead.len(), lead.len() + 2]);
    let merged = per_head.transpose(&perm)?.reshape(&[rows, d])?;
    merged.matmul(&params.wo)?.reshape(&shape)
}

/// Per-head attention weights of `multi_head_attention` on `x`,
/// `[lead.., n_heads, n_tok, n_tok]`. Read-only probe used by tests and
/// diagnostics.
pub fn multi_head_attention_probe<E: Element>(
    x: &Tensor<E>,
    params: &AttentionParams<E>,
    n_heads: usize,
) -> Result<Tensor<E>> {
    let shape = x.shape();
    let rank = shape.len();
    let (n_tok, d) = (shape[rank - 2], shape[rank - 1]);
    let d_h = d / n_heads;
    let lead = &shape[..rank - 2];
    let rows = x.numel() / d;
    let flat = x.reshape(&[rows, d])?;
    let q = head_split(&flat.matmul(&params.wq)?, lead, n_tok, n_heads, d_h)?;
    let k = head_split(&flat.matmul(&params.wk)?, lead, n_tok, n_heads, d_h)?;
    attention_weights(&q, &k)
}
