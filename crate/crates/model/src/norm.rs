//! Per-window, per-channel instance normalization applied to raw inputs
//! before patching. This is preprocessing, not a graph op: classification
//! never denormalizes, so no gradient flows through it. The removed
//! statistics are returned for reporting.

use tsfm_core::{Element, Result, Tensor};

/// Mean and population standard deviation removed from one channel of one
/// window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
}

/// Normalize `[B, C, L]` (or `[C, L]`) per (window, channel):
/// `(x - mean) / sqrt(var + eps)` with population variance.
pub fn instance_normalize<E: Element>(
    x: &Tensor<E>,
    eps: f64,
) -> Result<(Tensor<E>, Vec<ChannelStats>)> {
    let shape = x.shape();
    assert!(
        shape.len() == 2 || shape.len() == 3,
        "instance_normalize expects [C,L] or [B,C,L], got {shape:?}"
    );
    let len = *shape.last().unwrap();
    let rows = x.numel() / len;
    let mut out = Vec::with_capacity(x.numel());
    let mut stats = Vec::with_capacity(rows);
    {
        let data = x.data();
        for row in data.chunks_exact(len) {
            let mut mean = 0.0f64;
            for &v in row {
                mean += v.to_f64();
            }
            mean /= len as f64;
            let mut var = 0.0f64;
            for &v in row {
                let d = v.to_f64() - mean;
                var += d * d;
            }
            var /= len as f64;
            let denom = (var + eps).sqrt();
            stats.push(ChannelStats { mean, std: var.sqrt() });
            for &v in row {
                out.push(E::of_f64((v.to_f64() - mean) / denom));
            }
        }
    }
    Ok((Tensor::from_vec(&shape, out)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tsfm_core::Rng;

    #[test]
    fn constant_channel_maps_to_near_zero() {
        let x = Tensor::<f32>::full(&[1, 4], 5.0).unwrap();
        let (y, stats) = instance_normalize(&x, 1e-5).unwrap();
        assert!(y.to_vec().iter().all(|v| v.abs() <= 1e-2));
        assert_eq!(stats[0].mean, 5.0);
        assert_eq!(stats[0].std, 0.0);
    }

    #[test]
    fn affine_invariance_per_channel() {
        // Variance well above eps so standardization is affine-invariant
        // to within the stated tolerance.
        let mut rng = Rng::new(3);
        let x = Tensor::<f32>::rand_uniform(&[2, 2, 16], -3.0, 3.0, &mut rng);
        let scaled: Vec<f32> = x
            .to_vec()
            .chunks_exact(16)
            .enumerate()
            .flat_map(|(c, row)| {
                let (a, b) = (1.5 + c as f32, -3.0 * c as f32);
                row.iter().map(move |&v| a * v + b).collect::<Vec<_>>()
            })
            .collect();
        let xs = Tensor::from_vec(&[2, 2, 16], scaled).unwrap();
        let (y0, _) = instance_normalize(&x, 1e-5).unwrap();
        let (y1, _) = instance_normalize(&xs, 1e-5).unwrap();
        for (a, b) in y0.to_vec().iter().zip(y1.to_vec()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn output_moments_standardized() {
        let mut rng = Rng::new(9);
        let x = Tensor::<f64>::rand_uniform(&[3, 128], -4.0, 4.0, &mut rng);
        let (y, _) = instance_normalize(&x, 1e-5).unwrap();
        for row in y.to_vec().chunks_exact(128) {
            let mean: f64 = row.iter().sum::<f64>() / 128.0;
            let var: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 128.0;
            assert!(mean.abs() < 1e-6);
            assert!((var.sqrt() - 1.0).abs() < 1e-4);
        }
    }
}
