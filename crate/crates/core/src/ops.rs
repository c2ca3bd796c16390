//! Differentiable tensor operations. Each op validates shapes, computes the
//! forward value through the kernels, and registers a backward closure.
//!
//! Broadcasting is deliberately absent: elementwise ops demand identical
//! shapes and batched matmul demands identical leading extents, with
//! [`Tensor::expand`] as the explicit escape hatch. Silent shape bugs are
//! worse than a few reshape calls.

use crate::error::{Result, TensorError};
use crate::kernels as kn;
use crate::tensor::{BackCtx, Element, Tensor};

fn same_shape<E: Element>(op: &'static str, a: &Tensor<E>, b: &Tensor<E>) -> Result<Vec<usize>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa != sb {
        return Err(TensorError::ShapeMismatch { op, lhs: sa, rhs: sb });
    }
    Ok(sa)
}

impl<E: Element> Tensor<E> {
    pub fn add(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        let shape = same_shape("add", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(&a, &b)| a + b)
            .collect();
        Tensor::from_op("add", vec![self.clone(), other.clone()], shape, data, |ctx| {
            vec![Some(ctx.dy.to_vec()), Some(ctx.dy.to_vec())]
        })
    }

    pub fn sub(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        let shape = same_shape("sub", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(&a, &b)| a - b)
            .collect();
        Tensor::from_op("sub", vec![self.clone(), other.clone()], shape, data, |ctx| {
            let neg = ctx.dy.iter().map(|&g| -g).collect();
            vec![Some(ctx.dy.to_vec()), Some(neg)]
        })
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        let shape = same_shape("mul", self, other)?;
        let data = self
            .data()
            .iter()
            .zip(other.data().iter())
            .map(|(&a, &b)| a * b)
            .collect();
        Tensor::from_op("mul", vec![self.clone(), other.clone()], shape, data, |ctx| {
            let a = ctx.inputs[0].data();
            let b = ctx.inputs[1].data();
            let da = ctx.dy.iter().zip(b.iter()).map(|(&g, &v)| g * v).collect();
            let db = ctx.dy.iter().zip(a.iter()).map(|(&g, &v)| g * v).collect();
            vec![Some(da), Some(db)]
        })
    }

    pub fn mul_scalar(&self, c: E) -> Result<Tensor<E>> {
        let data = self.data().iter().map(|&v| v * c).collect();
        Tensor::from_op("mul_scalar", vec![self.clone()], self.shape(), data, move |ctx| {
            vec![Some(ctx.dy.iter().map(|&g| g * c).collect())]
        })
    }

    /// Batched matrix product. Both operands must have rank >= 2 and rank
    /// must match; leading (batch) extents must be exactly equal.
    pub fn matmul(&self, other: &Tensor<E>) -> Result<Tensor<E>> {
        let (sa, sb) = (self.shape(), other.shape());
        let rank = sa.len();
        let compatible = rank >= 2
            && sb.len() == rank
            && sa[..rank - 2] == sb[..rank - 2]
            && sa[rank - 1] == sb[rank - 2];
        if !compatible {
            return Err(TensorError::ShapeMismatch { op: "matmul", lhs: sa, rhs: sb });
        }
        let (m, k, n) = (sa[rank - 2], sa[rank - 1], sb[rank - 1]);
        let batch: usize = sa[..rank - 2].iter().product();
        let mut out_shape = sa.clone();
        out_shape[rank - 1] = n;
        let mut data = vec![E::zero(); batch * m * n];
        {
            let a = self.data();
            let b = other.data();
            for s in 0..batch {
                kn::gemm_nn_acc(
                    &a[s * m * k..(s + 1) * m * k],
                    &b[s * k * n..(s + 1) * k * n],
                    &mut data[s * m * n..(s + 1) * m * n],
                    m,
                    k,
                    n,
                );
            }
        }
        Tensor::from_op(
            "matmul",
            vec![self.clone(), other.clone()],
            out_shape,
            data,
            move |ctx| {
                let a = ctx.inputs[0].data();
                let b = ctx.inputs[1].data();
                let mut da = vec![E::zero(); a.len()];
                let mut db = vec![E::zero(); b.len()];
                for s in 0..batch {
                    let dy = &ctx.dy[s * m * n..(s + 1) * m * n];
                    // dA = dY * B^T
                    kn::gemm_nt_acc(
                        dy,
                        &b[s * k * n..(s + 1) * k * n],
                        &mut da[s * m * k..(s + 1) * m * k],
                        m,
                        n,
                        k,
                    );
                    // dB = A^T * dY
                    kn::gemm_tn_acc(
                        &a[s * m * k..(s + 1) * m * k],
                        dy,
                        &mut db[s * k * n..(s + 1) * k * n],
                        m,
                        k,
                        n,
                    );
                }
                vec![Some(da), Some(db)]
            },
        )
    }

    /// Axis permutation (copying; tensors stay contiguous row-major).
    pub fn transpose(&self, perm: &[usize]) -> Result<Tensor<E>> {
        let shape = self.shape();
        let rank = shape.len();
        let mut seen = vec![false; rank];
        let valid = perm.len() == rank && perm.iter().all(|&p| p < rank && !std::mem::replace(&mut seen[p], true));
        if !valid {
            return Err(TensorError::Dim {
                op: "transpose",
                msg: format!("perm {:?} is not a permutation of 0..{}", perm, rank),
            });
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
        let mut data = vec![E::zero(); self.numel()];
        kn::transpose_copy(&self.data(), &mut data, &shape, perm);
        let perm_owned = perm.to_vec();
        let out_shape_back = out_shape.clone();
        Tensor::from_op("transpose", vec![self.clone()], out_shape, data, move |ctx| {
            let mut inv = vec![0usize; perm_owned.len()];
            for (i, &p) in perm_owned.iter().enumerate() {
                inv[p] = i;
            }
            let mut dx = vec![E::zero(); ctx.dy.len()];
            kn::transpose_copy(ctx.dy, &mut dx, &out_shape_back, &inv);
            vec![Some(dx)]
        })
    }

    /// Shape change preserving row-major order and element count.
    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor<E>> {
        let numel: usize = new_shape.iter().product();
        if numel != self.numel() {
            return Err(TensorError::Dim {
                op: "reshape",
                msg: format!("cannot reshape {:?} into {:?}", self.shape(), new_shape),
            });
        }
        let data = self.to_vec();
        Tensor::from_op("reshape", vec![self.clone()], new_shape.to_vec(), data, |ctx| {
            vec![Some(ctx.dy.to_vec())]
        })
    }

    /// Repeat extent-1 axes up to `target`; rank must match and every other
    /// extent must be equal. The explicit alternative to broadcasting.
    pub fn expand(&self, target: &[usize]) -> Result<Tensor<E>> {
        let shape = self.shape();
        let ok = shape.len() == target.len()
            && shape.iter().zip(target).all(|(&s, &t)| s == t || s == 1);
        if !ok {
            return Err(TensorError::ShapeMismatch {
                op: "expand",
                lhs: shape,
                rhs: target.to_vec(),
            });
        }
        let numel: usize = target.iter().product();
        let mut data = vec![E::zero(); numel];
        kn::expand_copy(&self.data(), &mut data, &shape, target);
        let in_shape = shape.clone();
        let out_shape = target.to_vec();
        Tensor::from_op("expand", vec![self.clone()], target.to_vec(), data, move |ctx| {
            let mut dx = vec![E::zero(); in_shape.iter().product()];
            kn::expand_reduce(ctx.dy, &mut dx, &in_shape, &out_shape);
            vec![Some(dx)]
        })
    }

    /// Contiguous sub-range along one axis.
    pub fn slice(&self, axis: usize, start: usize, len: usize) -> Result<Tensor<E>> {
        let shape = self.shape();
        if axis >= shape.len() || start + len > shape[axis] || len == 0 {
            return Err(TensorError::Dim {
                op: "slice",
                msg: format!(
                    "range {}..{} on axis {} of shape {:?}",
                    start,
                    start + len,
                    axis,
                    shape
                ),
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let extent = shape[axis];
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let mut data = Vec::with_capacity(outer * len * inner);
        {
            let src = self.data();
            for o in 0..outer {
                let base = (o * extent + start) * inner;
                data.extend_from_slice(&src[base..base + len * inner]);
            }
        }
        Tensor::from_op("slice", vec![self.clone()], out_shape, data, move |ctx| {
            let mut dx = vec![E::zero(); outer * extent * inner];
            for o in 0..outer {
                let base = (o * extent + start) * inner;
                dx[base..base + len * inner]
                    .copy_from_slice(&ctx.dy[o * len * inner..(o + 1) * len * inner]);
            }
            vec![Some(dx)]
        })
    }

    /// Mean over one axis (the axis is removed).
    pub fn mean_axis(&self, axis: usize) -> Result<Tensor<E>> {
        let shape = self.shape();
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(TensorError::Dim {
                op: "mean_axis",
                msg: format!("axis {} of shape {:?}", axis, shape),
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let extent = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        let inv = E::one() / E::from_usize(extent).unwrap();
        let mut data = vec![E::zero(); outer * inner];
        {
            let src = self.data();
            for o in 0..outer {
                let dst = &mut data[o * inner..(o + 1) * inner];
                for a in 0..extent {
                    let row = &src[(o * extent + a) * inner..(o * extent + a + 1) * inner];
                    for (d, &v) in dst.iter_mut().zip(row) {
                        *d = *d + v;
                    }
                }
                for d in dst.iter_mut() {
                    *d = *d * inv;
                }
            }
        }
        Tensor::from_op("mean_axis", vec![self.clone()], out_shape, data, move |ctx| {
            let mut dx = vec![E::zero(); outer * extent * inner];
            for o in 0..outer {
                let dyo = &ctx.dy[o * inner..(o + 1) * inner];
                for a in 0..extent {
                    let dst = &mut dx[(o * extent + a) * inner..(o * extent + a + 1) * inner];
                    for (d, &g) in dst.iter_mut().zip(dyo) {
                        *d = g * inv;
                    }
                }
            }
            vec![Some(dx)]
        })
    }

    /// Sum of all elements, as a [1]-shaped tensor.
    pub fn sum_all(&self) -> Result<Tensor<E>> {
        let mut acc = E::zero();
        for &v in self.data().iter() {
            acc = acc + v;
        }
        let numel = self.numel();
        Tensor::from_op("sum_all", vec![self.clone()], vec![1], vec![acc], move |ctx| {
            vec![Some(vec![ctx.dy[0]; numel])]
        })
    }

    /// Softmax over the last axis, computed with max-subtraction.
    pub fn softmax_lastaxis(&self) -> Result<Tensor<E>> {
        let shape = self.shape();
        let cols = match shape.last() {
            Some(&c) if c >= 1 => c,
            _ => {
                return Err(TensorError::Dim {
                    op: "softmax_lastaxis",
                    msg: format!("last axis must be non-empty, shape {:?}", shape),
                })
            }
        };
        let mut data = vec![E::zero(); self.numel()];
        kn::softmax_rows(&self.data(), &mut data, cols);
        Tensor::from_op("softmax_lastaxis", vec![self.clone()], shape, data, move |ctx| {
            let mut dx = vec![E::zero(); ctx.dy.len()];
            kn::softmax_rows_backward(ctx.out, ctx.dy, &mut dx, cols);
            vec![Some(dx)]
        })
    }

    /// Layer normalization over the last axis with per-feature affine terms.
    pub fn layer_norm(&self, gamma: &Tensor<E>, beta: &Tensor<E>, eps: E) -> Result<Tensor<E>> {
        let shape = self.shape();
        let d = *shape.last().ok_or_else(|| TensorError::Dim {
            op: "layer_norm",
            msg: "input must have rank >= 1".into(),
        })?;
        if gamma.shape() != [d] || beta.shape() != [d] {
            return Err(TensorError::ShapeMismatch {
                op: "layer_norm",
                lhs: gamma.shape(),
                rhs: vec![d],
            });
        }
        if eps < E::zero() {
            return Err(TensorError::Dim { op: "layer_norm", msg: "eps must be >= 0".into() });
        }
        let mut data = vec![E::zero(); self.numel()];
        let saved = kn::layer_norm_rows(&self.data(), &gamma.data(), &beta.data(), eps, &mut data);
        Tensor::from_op(
            "layer_norm",
            vec![self.clone(), gamma.clone(), beta.clone()],
            shape,
            data,
            move |ctx| {
                let x = ctx.inputs[0].data();
                let g = ctx.inputs[1].data();
                let mut dx = vec![E::zero(); x.len()];
                let mut dgamma = vec![E::zero(); g.len()];
                let mut dbeta = vec![E::zero(); g.len()];
                kn::layer_norm_rows_backward(&x, &g, &saved, ctx.dy, &mut dx, &mut dgamma, &mut dbeta);
                vec![Some(dx), Some(dgamma), Some(dbeta)]
            },
        )
    }

    /// Exact (erf-based) GELU: x * Phi(x). The forward CDF values are kept
    /// for the backward pass so erf is evaluated once per element.
    pub fn gelu(&self) -> Result<Tensor<E>> {
        let phis: Vec<E> = self.data().iter().map(|&v| kn::phi(v)).collect();
        let data = self.data().iter().zip(&phis).map(|(&v, &p)| v * p).collect();
        Tensor::from_op("gelu", vec![self.clone()], self.shape(), data, move |ctx| {
            let x = ctx.inputs[0].data();
            let dx = ctx
                .dy
                .iter()
                .zip(x.iter())
                .zip(&phis)
                .map(|((&g, &v), &p)| g * (p + v * kn::phi_pdf(v)))
                .collect();
            vec![Some(dx)]
        })
    }

    /// Mean cross-entropy between logits `[B,K]` and integer labels, fused
    /// with a log-sum-exp for stability.
    pub fn cross_entropy_mean(&self, labels: &[usize]) -> Result<Tensor<E>> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(TensorError::Dim {
                op: "cross_entropy_mean",
                msg: format!("logits must be [batch, classes], got {:?}", shape),
            });
        }
        let (b, k) = (shape[0], shape[1]);
        if labels.len() != b || labels.iter().any(|&y| y >= k) {
            return Err(TensorError::Dim {
                op: "cross_entropy_mean",
                msg: format!("labels must be {} values in 0..{}", b, k),
            });
        }
        let mut total = E::zero();
        {
            let logits = self.data();
            for (row, &y) in logits.chunks_exact(k).zip(labels) {
                let mut max = row[0];
                for &v in &row[1..] {
                    if v > max {
                        max = v;
                    }
                }
                let mut sum = E::zero();
                for &v in row {
                    sum = sum + (v - max).exp();
                }
                total = total + max + sum.ln() - row[y];
            }
        }
        let loss = total / E::from_usize(b).unwrap();
        let labels_owned = labels.to_vec();
        Tensor::from_op("cross_entropy_mean", vec![self.clone()], vec![1], vec![loss], move |ctx| {
            let logits = ctx.inputs[0].data();
            let inv_b = E::one() / E::from_usize(b).unwrap();
            let mut dx = vec![E::zero(); logits.len()];
            kn::softmax_rows(&logits, &mut dx, k);
            for (row, &y) in dx.chunks_exact_mut(k).zip(&labels_owned) {
                row[y] = row[y] - E::one();
                for v in row.iter_mut() {
                    *v = *v * ctx.dy[0] * inv_b;
                }
            }
            vec![Some(dx)]
        })
    }
}

/// Concatenate along the last axis; all other extents must agree.
pub fn concat_lastaxis<E: Element>(parts: &[Tensor<E>]) -> Result<Tensor<E>> {
    if parts.is_empty() {
        return Err(TensorError::Dim { op: "concat_lastaxis", msg: "no inputs".into() });
    }
    let first = parts[0].shape();
    if first.is_empty() {
        return Err(TensorError::Dim { op: "concat_lastaxis", msg: "inputs must have rank >= 1".into() });
    }
    let lead = &first[..first.len() - 1];
    let mut widths = Vec::with_capacity(parts.len());
    for p in parts {
        let s = p.shape();
        if s.len() != first.len() || &s[..s.len() - 1] != lead {
            return Err(TensorError::ShapeMismatch {
                op: "concat_lastaxis",
                lhs: first.clone(),
                rhs: s,
            });
        }
        widths.push(s[s.len() - 1]);
    }
    let rows: usize = lead.iter().product();
    let total: usize = widths.iter().sum();
    let mut out_shape = first.clone();
    *out_shape.last_mut().unwrap() = total;
    let mut data = vec![E::zero(); rows * total];
    {
        let bufs: Vec<_> = parts.iter().map(|p| p.data()).collect();
        let mut col = 0;
        for (buf, &w) in bufs.iter().zip(&widths) {
            for r in 0..rows {
                data[r * total + col..r * total + col + w].copy_from_slice(&buf[r * w..(r + 1) * w]);
            }
            col += w;
        }
    }
    let widths_back = widths.clone();
    Tensor::from_op(
        "concat_lastaxis",
        parts.to_vec(),
        out_shape,
        data,
        move |ctx: &BackCtx<'_, E>| {
            let mut grads = Vec::with_capacity(widths_back.len());
            let mut col = 0;
            for &w in &widths_back {
                let mut g = vec![E::zero(); rows * w];
                for r in 0..rows {
                    g[r * w..(r + 1) * w]
                        .copy_from_slice(&ctx.dy[r * total + col..r * total + col + w]);
                }
                grads.push(Some(g));
                col += w;
            }
            grads
        },
    )
}
