//! Synthetic converter-signal generator.
//!
//! Nine channels at an effective (decimated) sample rate, driven by a
//! profile-specific speed trajectory: three-phase sinusoidal currents
//! amplitude-modulated by the load, a modulation reference and DC-link
//! voltage, two line-to-line voltages carrying the on-state-voltage drop,
//! and two temperatures from first-order thermal filters of the conduction
//! loss plus ambient drift and sensor noise.
//!
//! Degradation enters in two places: the on-state voltage shifts the
//! line-to-line clamping distortion, and the thermal-resistance multiplier
//! scales the fast (junction-side) filter component, which changes the
//! temperature waveform shape relative to the current drive. The
//! informative channels are therefore the currents and temperatures, not
//! the modulation reference.

use tsfm_core::Rng;

use crate::profile::{DegradationLevel, MissionProfile};

/// Channel names in generation order.
pub const CHANNEL_NAMES: [&str; 9] =
    ["v_m", "v_dc", "i_a", "i_b", "i_c", "v_ab", "v_bc", "t_h", "t_ntc"];

/// Default effective sample rate; the bench hardware is sampled two orders
/// of magnitude faster, this keeps desk-scale datasets tractable.
pub const DEFAULT_RATE_HZ: f64 = 1000.0;

/// One multi-channel raw recording.
#[derive(Debug, Clone)]
pub struct Recording {
    pub sample_rate_hz: f64,
    /// 9 rows in `CHANNEL_NAMES` order, equal lengths.
    pub channels: Vec<Vec<f32>>,
}

impl Recording {
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, name: &str) -> Option<&[f32]> {
        CHANNEL_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.channels[i].as_slice())
    }
}

/// Smoothed random load steps: a telegraph target filtered with tau = 0.5 s.
struct Transients {
    value: f64,
    target: f64,
    rate: f64,
    dt: f64,
}

impl Transients {
    fn step(&mut self, rng: &mut Rng) -> f64 {
        if self.rate > 0.0 && rng.uniform() < self.rate * self.dt {
            self.target = rng.range(-0.3, 0.3);
        }
        self.value += self.dt / 0.5 * (self.target - self.value);
        self.value
    }
}

/// Generate one recording of `duration_s` seconds at `rate_hz`,
/// deterministic in `seed`.
pub fn generate_recording(
    profile: &MissionProfile,
    level: DegradationLevel,
    duration_s: f64,
    rate_hz: f64,
    seed: u64,
) -> Recording {
    let n = (duration_s * rate_hz).round() as usize;
    let dt = 1.0 / rate_hz;
    let mut rng = Rng::new(seed);

    // Per-recording draws: band phases, ambient conditions.
    let phases: Vec<f64> = profile.bands.iter().map(|_| rng.range(0.0, std::f64::consts::TAU)).collect();
    let amb0 = rng.range(18.0, 38.0);
    let amb_phase = rng.range(0.0, std::f64::consts::TAU);
    let mut transients = Transients { value: 0.0, target: 0.0, rate: profile.transient_rate, dt };

    let mut channels: Vec<Vec<f32>> = (0..9).map(|_| Vec::with_capacity(n)).collect();

    let mut theta = rng.range(0.0, std::f64::consts::TAU);
    // Thermal filter states: fast junction-side path and slow heatsink path.
    let (mut y_fast, mut y_slow) = (0.0f64, 0.0f64);
    const TAU_FAST: f64 = 0.08;
    const TAU_SLOW: f64 = 2.0;

    for step in 0..n {
        let t = step as f64 * dt;

        // Speed trajectory in [0, 1.2].
        let mut s = profile.mean_load + transients.step(&mut rng);
        for ((f, a), ph) in profile.bands.iter().zip(&phases) {
            s += a * (std::f64::consts::TAU * f * t + ph).sin();
        }
        s = s.clamp(0.0, 1.2);

        // Electrical angle advances with the speed.
        let fe = 8.0 + 42.0 * s;
        theta += std::f64::consts::TAU * fe * dt;

        // Three-phase currents; every term scales with the amplitude so a
        // zero-load profile produces exactly zero current.
        let amp = 20.0 * s;
        let third = std::f64::consts::TAU / 3.0;
        let i_a = amp * ((theta).sin() + 0.03 * rng.gauss());
        let i_b = amp * ((theta - third).sin() + 0.03 * rng.gauss());
        let i_c = amp * ((theta + third).sin() + 0.03 * rng.gauss());

        // Modulation reference and DC link; independent of degradation.
        let v_m = (0.15 + 0.75 * s + 0.005 * rng.gauss()).clamp(0.0, 1.0);
        let v_dc = 400.0 * (1.0 - 0.04 * s) + 0.5 * rng.gauss();

        // Line-to-line voltages: fundamental plus the on-state clamping
        // distortion that grows with aging.
        let k_ll = 0.61;
        let ang_ab = theta + std::f64::consts::FRAC_PI_6;
        let ang_bc = ang_ab - third;
        let drop = 2.0 * level.v_on;
        let v_ab = k_ll * v_dc * v_m * ang_ab.sin() - drop * ang_ab.sin().signum()
            + 0.3 * rng.gauss();
        let v_bc = k_ll * v_dc * v_m * ang_bc.sin() - drop * ang_bc.sin().signum()
            + 0.3 * rng.gauss();

        // Conduction loss drives two first-order thermal paths. Aging
        // multiplies the fast path, shifting the waveform mix.
        let p = level.v_on * (i_a.abs() + i_b.abs() + i_c.abs()) / 3.0;
        y_fast += dt / TAU_FAST * (p - y_fast);
        y_slow += dt / TAU_SLOW * (p - y_slow);
        let amb = amb0 + 2.0 * (std::f64::consts::TAU * t / 600.0 + amb_phase).sin();
        let t_ntc = amb + 0.85 * level.r_th * y_fast + 0.45 * y_slow + 0.5 * rng.gauss();
        let t_h = amb + 0.25 * level.r_th * y_fast + 0.80 * y_slow + 0.5 * rng.gauss();

        for (ch, v) in channels
            .iter_mut()
            .zip([v_m, v_dc, i_a, i_b, i_c, v_ab, v_bc, t_h, t_ntc])
        {
            ch.push(v as f32);
        }
    }

    Recording { sample_rate_hz: rate_hz, channels }
}
