//! Fixed-length windows cut from recordings and the in-memory dataset type.

use crate::generate::Recording;
use crate::DataError;

/// One `[C, L]` training window (row-major) with its provenance.
#[derive(Debug, Clone)]
pub struct Window {
    pub data: Vec<f32>,
    pub label: Option<usize>,
    pub profile: String,
}

/// A set of equally-shaped windows plus the channel names they carry.
#[derive(Debug, Clone, Default)]
pub struct WindowDataset {
    pub channels: Vec<String>,
    pub window_len: usize,
    pub windows: Vec<Window>,
}

impl WindowDataset {
    pub fn new(channels: Vec<String>, window_len: usize) -> Self {
        WindowDataset { channels, window_len, windows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Fraction of windows carrying a label.
    pub fn labeled_fraction(&self) -> f64 {
        if self.windows.is_empty() {
            return 0.0;
        }
        self.windows.iter().filter(|w| w.label.is_some()).count() as f64
            / self.windows.len() as f64
    }

    /// Distinct profile names present, sorted.
    pub fn profiles(&self) -> Vec<String> {
        let mut names: Vec<String> = self.windows.iter().map(|w| w.profile.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    /// Cut non-overlapping-by-default sliding windows out of a recording,
    /// keeping only the named channels (in the given order). Window count
    /// is floor((len - L) / stride) + 1.
    pub fn extend_from_recording(
        &mut self,
        rec: &Recording,
        channel_names: &[String],
        stride: usize,
        label: Option<usize>,
        profile: &str,
    ) -> Result<usize, DataError> {
        let l = self.window_len;
        if rec.len() < l {
            return Err(DataError::Data(format!(
                "recording of {} samples is shorter than the window length {}",
                rec.len(),
                l
            )));
        }
        if stride == 0 {
            return Err(DataError::Config("stride must be positive".into()));
        }
        let rows: Vec<&[f32]> = channel_names
            .iter()
            .map(|n| {
                rec.channel(n).ok_or_else(|| DataError::Config(format!("unknown channel {n}")))
            })
            .collect::<Result<_, _>>()?;
        let count = (rec.len() - l) / stride + 1;
        for w in 0..count {
            let start = w * stride;
            let mut data = Vec::with_capacity(rows.len() * l);
            for row in &rows {
                data.extend_from_slice(&row[start..start + l]);
            }
            self.windows.push(Window { data, label, profile: profile.to_string() });
        }
        Ok(count)
    }
}
