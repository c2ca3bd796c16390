//! Dynamic time warping with absolute-difference local cost:
//! D(i,j) = |a_i - b_j| + min(D(i-1,j), D(i,j-1), D(i-1,j-1)).

use crate::DataError;

/// Classic O(n*m) dynamic program over the full cost matrix (two rolling
/// rows). Returns D(n, m).
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64, DataError> {
    if a.is_empty() || b.is_empty() {
        return Err(DataError::Data("dtw on empty series".into()));
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &av in a {
        curr[0] = f64::INFINITY;
        for (j, &bv) in b.iter().enumerate() {
            let cost = (av - bv).abs();
            curr[j + 1] = cost + prev[j + 1].min(curr[j]).min(prev[j]);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// Sakoe-Chiba banded variant: cells with |i - j| > band are skipped.
/// Off by default in the pipeline; a speed option for long series.
pub fn dtw_distance_banded(a: &[f64], b: &[f64], band: usize) -> Result<f64, DataError> {
    if a.is_empty() || b.is_empty() {
        return Err(DataError::Data("dtw on empty series".into()));
    }
    let (n, m) = (a.len(), b.len());
    // The band must at least cover the length difference to stay feasible.
    let band = band.max(n.abs_diff(m));
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for (i, &av) in a.iter().enumerate() {
        curr.fill(f64::INFINITY);
        let lo = i.saturating_sub(band);
        let hi = (i + band + 1).min(m);
        for j in lo..hi {
            let cost = (av - b[j]).abs();
            curr[j + 1] = cost + prev[j + 1].min(curr[j]).min(prev[j]);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// Euclidean norm of the three phase currents, the signal profiles are
/// compared on.
pub fn current_norm(i_a: &[f32], i_b: &[f32], i_c: &[f32]) -> Vec<f64> {
    i_a.iter()
        .zip(i_b)
        .zip(i_c)
        .map(|((&a, &b), &c)| ((a as f64).powi(2) + (b as f64).powi(2) + (c as f64).powi(2)).sqrt())
        .collect()
}

/// Mean-pool down to at most `max_len` points (quadratic-cost guard before
/// DTW). A no-op when the input is already short enough.
pub fn downsample(x: &[f64], max_len: usize) -> Vec<f64> {
    assert!(max_len > 0);
    if x.len() <= max_len {
        return x.to_vec();
    }
    let chunk = x.len().div_ceil(max_len);
    x.chunks(chunk)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}
