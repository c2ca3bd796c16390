//! Mission profiles (drive-cycle load trajectories) and discrete
//! degradation levels of the power module.

use serde::{Deserialize, Serialize};

/// Parameters of a synthetic drive cycle. The speed trajectory is a mean
/// load plus low-frequency spectral bands plus smoothed random load steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionProfile {
    pub name: String,
    /// Baseline load in [0, 1].
    pub mean_load: f64,
    /// (frequency Hz, amplitude) components of the speed trajectory.
    pub bands: Vec<(f64, f64)>,
    /// Expected load-step events per second.
    pub transient_rate: f64,
}

impl MissionProfile {
    pub fn new(name: &str, mean_load: f64, bands: &[(f64, f64)], transient_rate: f64) -> Self {
        MissionProfile {
            name: name.to_string(),
            mean_load,
            bands: bands.to_vec(),
            transient_rate,
        }
    }
}

/// The four standard drive cycles used throughout: three city/urban cycles
/// with comparable statistics and one highway cycle (hwfet) with roughly
/// double the sustained load and few transients, which makes it the
/// natural out-of-distribution hold-out.
pub fn standard_profiles() -> Vec<MissionProfile> {
    vec![
        MissionProfile::new("nycc", 0.32, &[(0.20, 0.20), (0.52, 0.14), (1.10, 0.08)], 0.8),
        MissionProfile::new("la92", 0.48, &[(0.15, 0.24), (0.70, 0.12)], 0.5),
        MissionProfile::new("udds", 0.42, &[(0.26, 0.18), (0.90, 0.09)], 0.6),
        MissionProfile::new("hwfet", 0.85, &[(0.05, 0.10), (0.30, 0.05)], 0.1),
    ]
}

/// One of K discrete aging states of the power module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationLevel {
    pub level: usize,
    /// On-state voltage in volts, interpolated 2.97 -> 3.12 across levels.
    pub v_on: f64,
    /// Thermal-resistance multiplier of the fast (junction-side) path,
    /// >= 1 and monotone in the level.
    pub r_th: f64,
}

impl DegradationLevel {
    /// `level` in 0..n_levels; level 0 is a new device.
    pub fn new(level: usize, n_levels: usize) -> Self {
        assert!(n_levels >= 2 && level < n_levels);
        let t = level as f64 / (n_levels - 1) as f64;
        DegradationLevel {
            level,
            v_on: 2.97 + (3.12 - 2.97) * t,
            r_th: 1.0 + 0.30 * t,
        }
    }
}
