//! On-disk dataset layout: one CSV per recording with header
//! `t,<channel names>`, plus a JSON manifest listing recordings, profile
//! ids, level labels, effective rate, and split tags. Windows are
//! materialized on load, never stored.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::generate::{Recording, CHANNEL_NAMES};
use crate::window::WindowDataset;
use crate::DataError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingEntry {
    pub file: String,
    pub profile: String,
    pub level: usize,
    pub seed: u64,
    /// "train" or "test", written back by the DTW/OOD-selection step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub sample_rate_hz: f64,
    pub window_len: usize,
    pub stride: usize,
    pub labeled_frac: f64,
    pub seed: u64,
    pub channels: Vec<String>,
    pub recordings: Vec<RecordingEntry>,
    /// Chosen OOD profile, written by the DTW step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ood_profile: Option<String>,
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| DataError::Data(format!("manifest serialization: {e}")))?;
        fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Manifest, DataError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| DataError::Config(format!("manifest {}: {e}", path.display())))
    }

    /// Load and window every recording whose split tag matches `role`
    /// (or all when `role` is None).
    pub fn load_windows(&self, dir: &Path, role: Option<&str>) -> Result<WindowDataset, DataError> {
        let mut ds = WindowDataset::new(self.channels.clone(), self.window_len);
        for entry in &self.recordings {
            if let Some(want) = role {
                if entry.split.as_deref() != Some(want) {
                    continue;
                }
            }
            let rec = read_recording_csv(&dir.join(&entry.file), self.sample_rate_hz)?;
            ds.extend_from_recording(
                &rec,
                &self.channels,
                self.stride,
                Some(entry.level),
                &entry.profile,
            )?;
        }
        Ok(ds)
    }
}

/// Write a recording as CSV with header `t,<channel names>`. Values use
/// shortest-roundtrip formatting, so rewriting the same recording is
/// byte-identical and reading recovers the exact f32 values.
pub fn write_recording_csv(rec: &Recording, path: &Path) -> Result<(), DataError> {
    let mut out = String::with_capacity(rec.len() * 64);
    out.push('t');
    for name in CHANNEL_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let dt = 1.0 / rec.sample_rate_hz;
    for row in 0..rec.len() {
        out.push_str(&format!("{}", row as f64 * dt));
        for ch in &rec.channels {
            out.push(',');
            out.push_str(&format!("{}", ch[row]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parse a recording CSV written by [`write_recording_csv`].
pub fn read_recording_csv(path: &Path, sample_rate_hz: f64) -> Result<Recording, DataError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| DataError::Parse(format!("{}: empty file", path.display())))?;
    let expected: Vec<&str> = std::iter::once("t").chain(CHANNEL_NAMES).collect();
    let got: Vec<&str> = header.split(',').collect();
    if got != expected {
        return Err(DataError::Parse(format!("{}: unexpected header {header:?}", path.display())));
    }
    let mut channels: Vec<Vec<f32>> = (0..9).map(|_| Vec::new()).collect();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let _t = fields.next();
        for ch in channels.iter_mut() {
            let field = fields.next().ok_or_else(|| {
                DataError::Parse(format!("{}:{}: missing fields", path.display(), lineno + 2))
            })?;
            let v: f32 = field.parse().map_err(|e| {
                DataError::Parse(format!("{}:{}: {e}", path.display(), lineno + 2))
            })?;
            ch.push(v);
        }
        if fields.next().is_some() {
            return Err(DataError::Parse(format!(
                "{}:{}: too many fields",
                path.display(),
                lineno + 2
            )));
        }
    }
    Ok(Recording { sample_rate_hz, channels })
}

/// Conventional CSV filename of a recording.
pub fn recording_filename(profile: &str, level: usize, index: usize) -> PathBuf {
    PathBuf::from(format!("{profile}_l{level}_r{index:03}.csv"))
}
