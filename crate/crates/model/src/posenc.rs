//! Fixed sinusoidal positional encoding over the patch axis:
//! entry (pos, 2i) = sin(pos / 10000^(2i/d)), entry (pos, 2i+1) = cos of the
//! same argument. Shared identically across channels; not learnable.

use tsfm_core::{Element, Tensor};

use crate::ModelError;

pub fn positional_encoding<E: Element>(n: usize, d: usize) -> Result<Tensor<E>, ModelError> {
    if d % 2 != 0 {
        return Err(ModelError::Config(format!(
            "positional encoding needs an even width, got d={d}"
        )));
    }
    let mut data = Vec::with_capacity(n * d);
    for pos in 0..n {
        for i in 0..d {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * pair / d as f64);
            let v = if i % 2 == 0 { angle.sin() } else { angle.cos() };
            data.push(E::of_f64(v));
        }
    }
    Ok(Tensor::from_vec(&[n, d], data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_zero_alternates_zero_one() {
        let t = positional_encoding::<f64>(3, 6).unwrap();
        let row0 = &t.to_vec()[..6];
        assert_eq!(row0, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn pinned_sin_values() {
        // (pos=1, i=0): sin(1) = 0.8414710
        let t = positional_encoding::<f64>(2, 4).unwrap();
        let v = t.to_vec();
        assert!((v[4] - 0.841_471_0).abs() < 1e-6);
        // d=4, (pos=1, 2i=2): sin(1 / 10000^(1/2)) = sin(0.01) = 0.0099998
        assert!((v[6] - 0.009_999_8).abs() < 1e-6);
    }

    #[test]
    fn odd_width_rejected() {
        assert!(positional_encoding::<f32>(4, 5).is_err());
    }

    #[test]
    fn formula_matches_at_random_positions() {
        let (n, d) = (32, 64);
        let t = positional_encoding::<f64>(n, d).unwrap();
        let v = t.to_vec();
        let mut rng = tsfm_core::Rng::new(123);
        for _ in 0..100 {
            let pos = rng.index(n);
            let i = rng.index(d);
            let angle = pos as f64 / 10000f64.powf(2.0 * ((i / 2) as f64) / d as f64);
            let expect = if i % 2 == 0 { angle.sin() } else { angle.cos() };
            assert!((v[pos * d + i] - expect).abs() < 1e-12);
        }
    }
}
