//! Raw slice kernels behind the tensor ops. Everything here is plain
//! row-major loops shaped so the autovectorizer can do its job; per-element
//! summation order is fixed, which keeps results bit-reproducible.

use crate::tensor::Element;

/// out[m,n] += a[m,k] * b[k,n]
pub fn gemm_nn_acc<E: Element>(a: &[E], b: &[E], out: &mut [E], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
}

/// out[m,n] += a[m,k] * b[n,k]^T  (dot products of contiguous rows)
pub fn gemm_nt_acc<E: Element>(a: &[E], b: &[E], out: &mut [E], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (j, o) in orow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = E::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                acc = acc + x * y;
            }
            *o = *o + acc;
        }
    }
}

/// out[k,n] += a[m,k]^T * b[m,n]  (axpy rows)
pub fn gemm_tn_acc<E: Element>(a: &[E], b: &[E], out: &mut [E], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
}

/// Row-major strides for a shape.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

/// Permute axes: out has shape `in_shape` permuted by `perm`;
/// out[i0,..] = in[coords mapped through perm].
pub fn transpose_copy<E: Element>(input: &[E], out: &mut [E], in_shape: &[usize], perm: &[usize]) {
    let rank = in_shape.len();
    let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();
    let in_strides = strides(in_shape);
    // Stride of the input as we walk each output axis.
    let walk: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let numel: usize = in_shape.iter().product();
    if numel == 0 {
        return;
    }
    let mut coords = vec![0usize; rank];
    let mut in_off = 0usize;
    for o in out.iter_mut().take(numel) {
        *o = input[in_off];
        // Odometer increment over the output shape.
        for d in (0..rank).rev() {
            coords[d] += 1;
            in_off += walk[d];
            if coords[d] < out_shape[d] {
                break;
            }
            in_off -= walk[d] * out_shape[d];
            coords[d] = 0;
        }
    }
}

/// Broadcast `input` (extent 1 axes repeat) to `out_shape`; shapes have
/// equal rank and every input extent is either equal or 1.
pub fn expand_copy<E: Element>(input: &[E], out: &mut [E], in_shape: &[usize], out_shape: &[usize]) {
    let rank = in_shape.len();
    let in_strides = strides(in_shape);
    let walk: Vec<usize> = (0..rank)
        .map(|d| if in_shape[d] == 1 { 0 } else { in_strides[d] })
        .collect();
    let numel: usize = out_shape.iter().product();
    let mut coords = vec![0usize; rank];
    let mut in_off = 0usize;
    for o in out.iter_mut().take(numel) {
        *o = input[in_off];
        for d in (0..rank).rev() {
            coords[d] += 1;
            in_off += walk[d];
            if coords[d] < out_shape[d] {
                break;
            }
            in_off -= walk[d] * out_shape[d];
            coords[d] = 0;
        }
    }
}

/// Reduction adjoint of `expand_copy`: sum `dy` (shaped `out_shape`) back
/// into `dx` (shaped `in_shape`).
pub fn expand_reduce<E: Element>(dy: &[E], dx: &mut [E], in_shape: &[usize], out_shape: &[usize]) {
    let rank = in_shape.len();
    let in_strides = strides(in_shape);
    let walk: Vec<usize> = (0..rank)
        .map(|d| if in_shape[d] == 1 { 0 } else { in_strides[d] })
        .collect();
    let numel: usize = out_shape.iter().product();
    let mut coords = vec![0usize; rank];
    let mut in_off = 0usize;
    for &g in dy.iter().take(numel) {
        dx[in_off] = dx[in_off] + g;
        for d in (0..rank).rev() {
            coords[d] += 1;
            in_off += walk[d];
            if coords[d] < out_shape[d] {
                break;
            }
            in_off -= walk[d] * out_shape[d];
            coords[d] = 0;
        }
    }
}

/// Numerically stable softmax over contiguous rows of length `cols`.
pub fn softmax_rows<E: Element>(src: &[E], dst: &mut [E], cols: usize) {
    debug_assert!(cols > 0);
    for (row, out) in src.chunks_exact(cols).zip(dst.chunks_exact_mut(cols)) {
        let mut max = row[0];
        for &v in &row[1..] {
            if v > max {
                max = v;
            }
        }
        let mut sum = E::zero();
        for (o, &v) in out.iter_mut().zip(row) {
            let e = (v - max).exp();
            *o = e;
            sum = sum + e;
        }
        let inv = E::one() / sum;
        for o in out.iter_mut() {
            *o = *o * inv;
        }
    }
}

/// dx = y * (dy - sum(dy * y)) per row, where y is the softmax output.
pub fn softmax_rows_backward<E: Element>(y: &[E], dy: &[E], dx: &mut [E], cols: usize) {
    for ((yr, dyr), dxr) in y
        .chunks_exact(cols)
        .zip(dy.chunks_exact(cols))
        .zip(dx.chunks_exact_mut(cols))
    {
        let mut dot = E::zero();
        for (&a, &b) in yr.iter().zip(dyr) {
            dot = dot + a * b;
        }
        for ((o, &yv), &dyv) in dxr.iter_mut().zip(yr).zip(dyr) {
            *o = yv * (dyv - dot);
        }
    }
}

/// Layer norm forward over rows; returns (mean, inverse std) per row for
/// the backward pass. Population variance.
pub fn layer_norm_rows<E: Element>(
    src: &[E],
    gamma: &[E],
    beta: &[E],
    eps: E,
    dst: &mut [E],
) -> Vec<(E, E)> {
    let cols = gamma.len();
    let rows = src.len() / cols;
    let mut saved = Vec::with_capacity(rows);
    let inv_n = E::one() / E::from_usize(cols).unwrap();
    for (row, out) in src.chunks_exact(cols).zip(dst.chunks_exact_mut(cols)) {
        let mut mean = E::zero();
        for &v in row {
            mean = mean + v;
        }
        mean = mean * inv_n;
        let mut var = E::zero();
        for &v in row {
            let d = v - mean;
            var = var + d * d;
        }
        var = var * inv_n;
        let rstd = E::one() / (var + eps).sqrt();
        for ((o, &v), (&g, &b)) in out.iter_mut().zip(row).zip(gamma.iter().zip(beta)) {
            *o = (v - mean) * rstd * g + b;
        }
        saved.push((mean, rstd));
    }
    saved
}

/// Layer norm backward over rows using saved (mean, rstd).
pub fn layer_norm_rows_backward<E: Element>(
    x: &[E],
    gamma: &[E],
    saved: &[(E, E)],
    dy: &[E],
    dx: &mut [E],
    dgamma: &mut [E],
    dbeta: &mut [E],
) {
    let cols = gamma.len();
    let inv_n = E::one() / E::from_usize(cols).unwrap();
    for (r, ((xr, dyr), dxr)) in x
        .chunks_exact(cols)
        .zip(dy.chunks_exact(cols))
        .zip(dx.chunks_exact_mut(cols))
        .enumerate()
    {
        let (mean, rstd) = saved[r];
        let mut sum_gdy = E::zero();
        let mut sum_gdy_xhat = E::zero();
        for ((&xv, &dyv), &g) in xr.iter().zip(dyr).zip(gamma) {
            let xhat = (xv - mean) * rstd;
            let gdy = g * dyv;
            sum_gdy = sum_gdy + gdy;
            sum_gdy_xhat = sum_gdy_xhat + gdy * xhat;
        }
        let mean_gdy = sum_gdy * inv_n;
        let mean_gdy_xhat = sum_gdy_xhat * inv_n;
        for (j, ((o, &xv), &dyv)) in dxr.iter_mut().zip(xr).zip(dyr).enumerate() {
            let xhat = (xv - mean) * rstd;
            let gdy = gamma[j] * dyv;
            *o = rstd * (gdy - mean_gdy - xhat * mean_gdy_xhat);
            dgamma[j] = dgamma[j] + dyv * xhat;
            dbeta[j] = dbeta[j] + dyv;
        }
    }
}

/// Standard normal CDF via the error function, at native precision.
pub fn phi<E: Element>(x: E) -> E {
    let half = E::of_f64(0.5);
    let inv_sqrt2 = E::of_f64(std::f64::consts::FRAC_1_SQRT_2);
    half * (E::one() + (x * inv_sqrt2).erf())
}

/// Standard normal density.
pub fn phi_pdf<E: Element>(x: E) -> E {
    let half = E::of_f64(0.5);
    let inv_sqrt_2pi = E::of_f64(1.0 / (2.0 * std::f64::consts::PI).sqrt());
    (-(half * x * x)).exp() * inv_sqrt_2pi
}
