use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::airlink::{BeaconSource, ReceiverModel};
use crate::calibration::DEFAULT_SILENCE_SPAN_HZ;
use crate::clock::{TunableOscillator, CHANNEL_11_HZ};
use crate::environment::TemperatureProfile;
use crate::error::{Error, Result};

fn yes() -> bool {
    true
}

fn default_listen_duration_s() -> f64 {
    1.0
}

fn default_window_len() -> usize {
    10
}

fn default_window_ppm() -> f64 {
    400.0
}

fn default_deadband_hz() -> f64 {
    45_000.0
}

fn default_silence_span_hz() -> f64 {
    DEFAULT_SILENCE_SPAN_HZ
}

fn default_lock_timeout_s() -> f64 {
    5.0
}

/// Device-side calibration parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibratorConfig {
    /// When false both clocks free-run at their configured settings.
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Dwell per RF setting during the channel sweep (t_L), on the local clock.
    #[serde(default = "default_listen_duration_s")]
    pub listen_duration_s: f64,
    /// Error of the uncalibrated timekeeping clock that paces the dwells.
    #[serde(default)]
    pub timekeeping_ppm: f64,
    #[serde(default = "default_silence_span_hz")]
    pub silence_span_hz: f64,
    /// Beacon intervals averaged per fine decision (N).
    #[serde(default = "default_window_len")]
    pub window_len: usize,
    #[serde(default = "default_window_ppm")]
    pub window_ppm: f64,
    #[serde(default = "default_deadband_hz")]
    pub deadband_hz: f64,
    #[serde(default = "yes")]
    pub if_tracking: bool,
    #[serde(default = "yes")]
    pub fast_calibration: bool,
    #[serde(default = "yes")]
    pub fine_calibration: bool,
    #[serde(default)]
    pub sliding_window: bool,
    /// Silence after which a locked device declares LOCK_LOST and re-sweeps.
    #[serde(default = "default_lock_timeout_s")]
    pub lock_timeout_s: f64,
}

impl Default for CalibratorConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            listen_duration_s: default_listen_duration_s(),
            timekeeping_ppm: 0.0,
            silence_span_hz: default_silence_span_hz(),
            window_len: default_window_len(),
            window_ppm: default_window_ppm(),
            deadband_hz: default_deadband_hz(),
            if_tracking: true,
            fast_calibration: true,
            fine_calibration: true,
            sliding_window: false,
            lock_timeout_s: default_lock_timeout_s(),
        }
    }
}

/// Everything needed to reproduce one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub rf_oscillator: TunableOscillator,
    pub chipping_oscillator: TunableOscillator,
    pub temperature: TemperatureProfile,
    pub beacon_source: BeaconSource,
    #[serde(default)]
    pub receiver: ReceiverModel,
    #[serde(default)]
    pub calibrator: CalibratorConfig,
    pub duration_s: f64,
    /// Resolution of temperature, noise and tick integration.
    pub sub_step_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    /// Channel 11, paper oscillator constants, lab temperature, 5 minutes.
    fn default() -> Self {
        let beacon_source = BeaconSource::new(CHANNEL_11_HZ);
        Self {
            rf_oscillator: TunableOscillator::rf(CHANNEL_11_HZ),
            chipping_oscillator: TunableOscillator::chipping(),
            temperature: TemperatureProfile::constant(25.0),
            sub_step_s: beacon_source.period_s / 10.0,
            beacon_source,
            receiver: ReceiverModel::default(),
            calibrator: CalibratorConfig::default(),
            duration_s: 300.0,
            seed: 0,
            output_path: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.rf_oscillator.validate()?;
        self.chipping_oscillator.validate()?;
        self.temperature.validate()?;
        self.beacon_source.validate()?;
        self.receiver.validate()?;
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::Config("duration_s must be > 0".into()));
        }
        if !(self.sub_step_s > 0.0) {
            return Err(Error::Config("sub_step_s must be > 0".into()));
        }
        // a hair of slack so that T_b / 10 itself passes
        if self.sub_step_s > self.beacon_source.period_s / 10.0 * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "sub_step_s {} exceeds a tenth of the beacon period",
                self.sub_step_s
            )));
        }
        let cal = &self.calibrator;
        if !(cal.listen_duration_s > 0.0) {
            return Err(Error::Config("listen_duration_s must be > 0".into()));
        }
        if !(cal.timekeeping_ppm.abs() < 1e6) {
            return Err(Error::Config("timekeeping_ppm out of range".into()));
        }
        if !(cal.silence_span_hz > 0.0) {
            return Err(Error::Config("silence_span_hz must be > 0".into()));
        }
        if cal.window_len == 0 {
            return Err(Error::Config("window_len must be >= 1".into()));
        }
        if !(cal.window_ppm > 0.0) {
            return Err(Error::Config("window_ppm must be > 0".into()));
        }
        if !(cal.deadband_hz >= 0.0 && cal.deadband_hz < self.rf_oscillator.delta_f_hz) {
            return Err(Error::Config(format!(
                "deadband_hz must lie in [0, {}) Hz",
                self.rf_oscillator.delta_f_hz
            )));
        }
        if !(cal.lock_timeout_s > 0.0) {
            return Err(Error::Config("lock_timeout_s must be > 0".into()));
        }
        Ok(())
    }
}
