//! Tunable on-chip oscillator models.
//!
//! Both clocks of a crystal-free radio (the 2.4 GHz RF local oscillator and the
//! 2 MHz chipping clock) are modelled the same way: an integer tuning setting
//! selects a base frequency on a linear grid, and the synthesized frequency is
//! that base perturbed by a linear temperature coefficient and a noise term,
//! both expressed in ppm.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal chipping rate of an IEEE 802.15.4 O-QPSK radio.
pub const CHIP_RATE_HZ: f64 = 2_000_000.0;

/// Centre of IEEE 802.15.4 channel 11.
pub const CHANNEL_11_HZ: f64 = 2_405_000_000.0;

/// Signed relative frequency error in parts per million.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PpmError(pub f64);

impl PpmError {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn abs(self) -> f64 {
        self.0.abs()
    }
}

impl fmt::Display for PpmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ppm", self.0)
    }
}

/// `(f - f_ref) / f_ref * 1e6`.
pub fn ppm_error(f_hz: f64, f_ref_hz: f64) -> Result<PpmError> {
    if !(f_ref_hz > 0.0) || !f_ref_hz.is_finite() {
        return Err(Error::Domain(format!(
            "reference frequency must be positive, got {f_ref_hz}"
        )));
    }
    if !f_hz.is_finite() {
        return Err(Error::Domain(format!("frequency must be finite, got {f_hz}")));
    }
    if f_hz == f_ref_hz {
        return Ok(PpmError(0.0));
    }
    Ok(PpmError((f_hz - f_ref_hz) / f_ref_hz * 1e6))
}

/// Statistical shape of the per-sample frequency noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Independent Gaussian sample at every query.
    #[default]
    White,
    /// Mean-reverting (Ornstein-Uhlenbeck) random walk. Every sample is still
    /// marginally `N(0, sigma)` but neighbouring samples are correlated over
    /// `noise_correlation_s`.
    RandomWalk,
}

fn default_noise_correlation_s() -> f64 {
    5.0
}

fn default_t_ref_c() -> f64 {
    25.0
}

/// A setting-indexed frequency source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunableOscillator {
    pub f_nominal_hz: f64,
    pub f_at_min_setting_hz: f64,
    pub delta_f_hz: f64,
    pub setting: u32,
    pub max_setting: u32,
    pub tempco_ppm_per_c: f64,
    #[serde(default = "default_t_ref_c")]
    pub t_ref_c: f64,
    pub noise_sigma_ppm: f64,
    #[serde(default)]
    pub noise_model: NoiseModel,
    #[serde(default = "default_noise_correlation_s")]
    pub noise_correlation_s: f64,
}

impl TunableOscillator {
    /// RF local oscillator: 90 kHz steps, -48.64 ppm/°C, 2σ = 34.1 ppm with
    /// noise correlated over 5 s.
    ///
    /// The tuning grid spans ±12,000 ppm around `f_nominal_hz` and starts at
    /// setting 0 (the bottom of the range).
    pub fn rf(f_nominal_hz: f64) -> Self {
        let delta_f_hz = 90_000.0;
        let f_at_min_setting_hz = f_nominal_hz * (1.0 - 12_000e-6);
        let max_setting = (f_nominal_hz * 24_000e-6 / delta_f_hz).ceil() as u32;
        Self {
            f_nominal_hz,
            f_at_min_setting_hz,
            delta_f_hz,
            setting: 0,
            max_setting,
            tempco_ppm_per_c: -48.64,
            t_ref_c: 25.0,
            noise_sigma_ppm: 34.1 / 2.0,
            noise_model: NoiseModel::RandomWalk,
            noise_correlation_s: default_noise_correlation_s(),
        }
    }

    /// 2 MHz chipping clock: 800 Hz (400 ppm) steps, +355 ppm/°C, 2σ = 278.5 ppm
    /// white noise.
    /// Starts at the setting whose base frequency is exactly 2 MHz.
    pub fn chipping() -> Self {
        let delta_f_hz = 800.0;
        let f_at_min_setting_hz = CHIP_RATE_HZ * (1.0 - 12_000e-6);
        let max_setting = (CHIP_RATE_HZ * 24_000e-6 / delta_f_hz).ceil() as u32;
        Self {
            f_nominal_hz: CHIP_RATE_HZ,
            f_at_min_setting_hz,
            delta_f_hz,
            setting: max_setting / 2,
            max_setting,
            tempco_ppm_per_c: 355.0,
            t_ref_c: 25.0,
            noise_sigma_ppm: 278.5 / 2.0,
            noise_model: NoiseModel::default(),
            noise_correlation_s: default_noise_correlation_s(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.f_nominal_hz,
            self.f_at_min_setting_hz,
            self.delta_f_hz,
            self.tempco_ppm_per_c,
            self.t_ref_c,
            self.noise_sigma_ppm,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("oscillator parameters must be finite".into()));
        }
        if self.f_nominal_hz <= 0.0 || self.f_at_min_setting_hz <= 0.0 {
            return Err(Error::Config("oscillator frequencies must be positive".into()));
        }
        if self.delta_f_hz <= 0.0 {
            return Err(Error::Config(format!(
                "delta_f_hz must be > 0, got {}",
                self.delta_f_hz
            )));
        }
        if self.setting > self.max_setting {
            return Err(Error::RangeViolation {
                setting: self.setting as i64,
                max_setting: self.max_setting,
            });
        }
        let top = self.f_at_min_setting_hz + self.max_setting as f64 * self.delta_f_hz;
        if top < self.f_nominal_hz * (1.0 + 1e-2) {
            return Err(Error::Config(format!(
                "tuning range tops out at {top} Hz, below nominal + 10,000 ppm"
            )));
        }
        if self.noise_sigma_ppm < 0.0 {
            return Err(Error::Config("noise_sigma_ppm must be >= 0".into()));
        }
        if self.noise_model == NoiseModel::RandomWalk && !(self.noise_correlation_s > 0.0) {
            return Err(Error::Config("noise_correlation_s must be > 0".into()));
        }
        Ok(())
    }

    /// Base frequency of `setting` at the reference temperature, without noise.
    pub fn base_frequency(&self, setting: u32) -> f64 {
        self.f_at_min_setting_hz + setting as f64 * self.delta_f_hz
    }

    /// Step size expressed in ppm of the nominal frequency.
    pub fn step_ppm(&self) -> f64 {
        self.delta_f_hz / self.f_nominal_hz * 1e6
    }

    /// Frequency at the current setting.
    pub fn synthesize(&self, temp_c: f64, noise_sample_ppm: f64) -> Result<f64> {
        synthesize_frequency(self, temp_c, noise_sample_ppm)
    }

    /// Applies a signed setting change, clamping to the supported range.
    pub fn step(&mut self, delta: i64) -> StepOutcome {
        let (next, outcome) = step_setting(self, delta);
        *self = next;
        outcome
    }
}

/// `base(setting) * (1 + (tempco * (T - T_ref) + noise) * 1e-6)`.
pub fn synthesize_frequency(osc: &TunableOscillator, temp_c: f64, noise_sample_ppm: f64) -> Result<f64> {
    if osc.setting > osc.max_setting {
        return Err(Error::RangeViolation {
            setting: osc.setting as i64,
            max_setting: osc.max_setting,
        });
    }
    let base = osc.base_frequency(osc.setting);
    let perturbation_ppm = osc.tempco_ppm_per_c * (temp_c - osc.t_ref_c) + noise_sample_ppm;
    Ok(base * (1.0 + perturbation_ppm * 1e-6))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub setting: u32,
    pub saturated: bool,
}

/// Returns a copy of `osc` with its setting moved by `delta`, clamped to
/// `[0, max_setting]`. Clamping is reported, never an error.
pub fn step_setting(osc: &TunableOscillator, delta: i64) -> (TunableOscillator, StepOutcome) {
    let wanted = osc.setting as i64 + delta;
    let clamped = wanted.clamp(0, osc.max_setting as i64) as u32;
    let mut next = osc.clone();
    next.setting = clamped;
    let outcome = StepOutcome {
        setting: clamped,
        saturated: clamped as i64 != wanted,
    };
    (next, outcome)
}

/// Stateful noise generator for one oscillator.
///
/// For [`NoiseModel::RandomWalk`] the state is an AR(1) discretisation of an
/// Ornstein-Uhlenbeck process started from its stationary law, so each
/// returned sample is exactly `N(0, sigma)` marginally.
#[derive(Debug, Clone)]
pub struct FrequencyNoise {
    model: NoiseModel,
    sigma_ppm: f64,
    correlation_s: f64,
    state: Option<f64>,
}

impl FrequencyNoise {
    pub fn new(model: NoiseModel, sigma_ppm: f64, correlation_s: f64) -> Self {
        Self {
            model,
            sigma_ppm,
            correlation_s,
            state: None,
        }
    }

    pub fn for_oscillator(osc: &TunableOscillator) -> Self {
        Self::new(osc.noise_model, osc.noise_sigma_ppm, osc.noise_correlation_s)
    }

    /// Draws the sample for the next query, `dt_s` after the previous one.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R, dt_s: f64) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        if self.sigma_ppm == 0.0 {
            return 0.0;
        }
        let next = match (self.model, self.state) {
            (NoiseModel::White, _) | (NoiseModel::RandomWalk, None) => self.sigma_ppm * z,
            (NoiseModel::RandomWalk, Some(prev)) => {
                let a = (-dt_s.max(0.0) / self.correlation_s).exp();
                a * prev + self.sigma_ppm * (1.0 - a * a).sqrt() * z
            }
        };
        self.state = Some(next);
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rf_at(base_hz: f64) -> TunableOscillator {
        let mut osc = TunableOscillator::rf(CHANNEL_11_HZ);
        osc.f_at_min_setting_hz = base_hz - 100.0 * osc.delta_f_hz;
        osc.setting = 100;
        osc
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let osc = rf_at(2.405e9);
        assert_eq!(osc.synthesize(25.0, 0.0).unwrap(), 2.405e9);
    }

    #[test]
    fn rf_tempco_over_ten_degrees() {
        let osc = rf_at(2.405e9);
        let f = osc.synthesize(35.0, 0.0).unwrap();
        let expected = 2.405e9 * (1.0 - 486.4e-6);
        assert!((f - expected).abs() < 1e-3, "{f} vs {expected}");
        assert_eq!(f.round(), 2_403_830_208.0);
    }

    #[test]
    fn chipping_tempco_over_one_degree() {
        let osc = TunableOscillator::chipping();
        assert_eq!(osc.base_frequency(osc.setting), 2_000_000.0);
        let f = osc.synthesize(26.0, 0.0).unwrap();
        assert!((f - 2_000_710.0).abs() < 1e-6, "{f}");
    }

    #[test]
    fn out_of_range_setting_is_rejected() {
        let mut osc = TunableOscillator::chipping();
        osc.setting = osc.max_setting + 1;
        assert!(matches!(osc.synthesize(25.0, 0.0), Err(Error::RangeViolation { .. })));
        assert!(osc.validate().is_err());
    }

    #[test]
    fn ppm_examples() {
        assert_eq!(ppm_error(2.4e9, 2.4e9).unwrap().value(), 0.0);
        assert!((ppm_error(2_400_096_000.0, 2.4e9).unwrap().value() - 40.0).abs() < 1e-9);
        assert!((ppm_error(1_998_000.0, 2e6).unwrap().value() + 1000.0).abs() < 1e-9);
        assert!(matches!(ppm_error(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(ppm_error(1.0, -5.0), Err(Error::Domain(_))));
    }

    #[test]
    fn step_examples() {
        let mut osc = TunableOscillator::rf(CHANNEL_11_HZ);
        osc.setting = 100;
        let (up, o) = step_setting(&osc, 1);
        assert_eq!((up.setting, o.saturated), (101, false));
        let (down, o) = step_setting(&osc, -20);
        assert_eq!((down.setting, o.saturated), (80, false));

        osc.setting = 0;
        let o = osc.step(-1);
        assert_eq!((osc.setting, o.saturated), (0, true));

        osc.setting = osc.max_setting;
        let o = osc.step(5);
        assert_eq!((osc.setting, o.saturated), (osc.max_setting, true));
    }

    #[test]
    fn default_ranges_cover_cold_start_offsets() {
        for osc in [TunableOscillator::rf(CHANNEL_11_HZ), TunableOscillator::chipping()] {
            osc.validate().unwrap();
            let top = osc.base_frequency(osc.max_setting);
            assert!(top >= osc.f_nominal_hz * (1.0 + 12_000e-6) - 1e-6);
            assert!(osc.f_at_min_setting_hz <= osc.f_nominal_hz * (1.0 - 12_000e-6) + 1e-6);
        }
    }

    #[test]
    fn narrow_range_fails_validation() {
        let mut osc = TunableOscillator::chipping();
        osc.max_setting = 10;
        osc.setting = 0;
        assert!(matches!(osc.validate(), Err(Error::Config(_))));
        osc = TunableOscillator::chipping();
        osc.delta_f_hz = 0.0;
        assert!(osc.validate().is_err());
    }

    fn two_sigma(samples: &[f64]) -> f64 {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        2.0 * var.sqrt()
    }

    #[test]
    fn noise_dispersion_matches_configured_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for osc in [TunableOscillator::rf(CHANNEL_11_HZ), TunableOscillator::chipping()] {
            for model in [NoiseModel::White, NoiseModel::RandomWalk] {
                let mut noise = FrequencyNoise::new(model, osc.noise_sigma_ppm, 0.5);
                let nominal = osc.base_frequency(osc.setting);
                let ppm: Vec<f64> = (0..20_000)
                    .map(|_| {
                        let f = osc.synthesize(osc.t_ref_c, noise.sample(&mut rng, 0.125)).unwrap();
                        ppm_error(f, nominal).unwrap().value()
                    })
                    .collect();
                let got = two_sigma(&ppm);
                let want = 2.0 * osc.noise_sigma_ppm;
                assert!((got / want - 1.0).abs() < 0.2, "{model:?}: 2σ {got} vs {want}");
            }
        }
    }

    #[test]
    fn random_walk_samples_are_correlated() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut noise = FrequencyNoise::new(NoiseModel::RandomWalk, 10.0, 100.0);
        let xs: Vec<f64> = (0..5000).map(|_| noise.sample(&mut rng, 0.01)).collect();
        let max_jump = xs.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        // per-step increment sd is 10*sqrt(2e-4) ≈ 0.14 ppm
        assert!(max_jump < 1.0, "{max_jump}");
    }
}
