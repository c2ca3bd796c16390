//! Profile-to-profile DTW similarity matrix (larger = more dissimilar) and
//! the out-of-distribution profile choice.

use crate::dtw::dtw_distance;
use crate::DataError;

/// Symmetric nonnegative matrix with zero diagonal over named profiles.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub names: Vec<String>,
    /// Row-major M x M.
    pub values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.values[p * self.names.len() + q]
    }

    /// Total distance of one profile to all others.
    pub fn row_sum(&self, p: usize) -> f64 {
        (0..self.names.len()).map(|q| self.get(p, q)).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("profile");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (p, n) in self.names.iter().enumerate() {
            out.push_str(n);
            for q in 0..self.names.len() {
                out.push(',');
                out.push_str(&format!("{}", self.get(p, q)));
            }
            out.push('\n');
        }
        out
    }
}

/// Build the matrix from per-profile realizations of the current-norm
/// signal (already downsampled). Entry (p, q) is the mean DTW distance
/// over all cross pairs of realizations, symmetrized by averaging; the
/// diagonal is zero by definition.
pub fn similarity_matrix(
    realizations: &[(String, Vec<Vec<f64>>)],
) -> Result<SimilarityMatrix, DataError> {
    let m = realizations.len();
    if m < 2 {
        return Err(DataError::Config(format!("need at least 2 profiles, got {m}")));
    }
    for (name, reps) in realizations {
        if reps.is_empty() {
            return Err(DataError::Data(format!("profile {name} has no realizations")));
        }
    }
    let mut values = vec![0.0; m * m];
    for p in 0..m {
        for q in (p + 1)..m {
            let mut total = 0.0;
            let mut count = 0usize;
            for a in &realizations[p].1 {
                for b in &realizations[q].1 {
                    total += dtw_distance(a, b)?;
                    count += 1;
                }
            }
            let mean = total / count as f64;
            values[p * m + q] = mean;
            values[q * m + p] = mean;
        }
    }
    Ok(SimilarityMatrix {
        names: realizations.iter().map(|(n, _)| n.clone()).collect(),
        values,
    })
}

/// The profile most dissimilar to all others: argmax over row sums, ties
/// broken by the lexicographically smallest name.
pub fn select_ood_profile(matrix: &SimilarityMatrix) -> &str {
    let mut best = 0usize;
    for p in 1..matrix.names.len() {
        let (rp, rb) = (matrix.row_sum(p), matrix.row_sum(best));
        if rp > rb || (rp == rb && matrix.names[p] < matrix.names[best]) {
            best = p;
        }
    }
    &matrix.names[best]
}
