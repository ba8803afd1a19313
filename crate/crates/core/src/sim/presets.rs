//! Ready-made scenarios reproducing the reference experiments.

use crate::clock::{TunableOscillator, CHANNEL_11_HZ, CHIP_RATE_HZ};
use crate::environment::TemperatureProfile;
use crate::sim::config::{CalibratorConfig, ScenarioConfig};

/// Chamber imperfections: ±0.3 °C stability, 2 % set-point error.
pub const CHAMBER_STABILITY_C: f64 = 0.3;
pub const CHAMBER_SET_ERROR: f64 = 0.02;
/// Thermal time constant of the chamber air; jitter wanders rather than
/// jumping between samples.
pub const CHAMBER_TIME_CONSTANT_S: f64 = 30.0;

fn in_chamber(profile: TemperatureProfile) -> TemperatureProfile {
    TemperatureProfile {
        jitter_correlation_s: Some(CHAMBER_TIME_CONSTANT_S),
        ..profile.with_chamber(CHAMBER_STABILITY_C, CHAMBER_SET_ERROR)
    }
}

/// RF grid whose setting 0 sits `start_ppm` away from `f_c`, spanning past
/// +1 % of nominal.
pub fn rf_starting_at(f_c: f64, start_ppm: f64) -> TunableOscillator {
    let mut osc = TunableOscillator::rf(f_c);
    osc.f_at_min_setting_hz = f_c * (1.0 + start_ppm * 1e-6);
    let span = f_c * (1.0 + 12_000e-6) - osc.f_at_min_setting_hz;
    osc.max_setting = (span / osc.delta_f_hz).ceil() as u32;
    osc.setting = 0;
    osc
}

/// RF grid with `f_c` exactly on a setting, which is the current one.
pub fn rf_on_grid(f_c: f64) -> TunableOscillator {
    let mut osc = TunableOscillator::rf(f_c);
    let below = (f_c * 12_000e-6 / osc.delta_f_hz).ceil() as u32;
    osc.f_at_min_setting_hz = f_c - below as f64 * osc.delta_f_hz;
    osc.setting = below;
    osc.max_setting = 2 * below;
    osc
}

/// Chipping clock whose current setting sits `start_ppm` from 2 MHz on the
/// default grid (rounded to the nearest step).
pub fn chipping_starting_at(start_ppm: f64) -> TunableOscillator {
    let mut osc = TunableOscillator::chipping();
    let target = CHIP_RATE_HZ * (1.0 + start_ppm * 1e-6);
    osc.setting = ((target - osc.f_at_min_setting_hz) / osc.delta_f_hz).round() as u32;
    osc
}

/// Bench start-up: RF at -850 ppm from channel 11, chipping clock at
/// +8000 ppm, constant 25 °C, five minutes.
pub fn lab_startup() -> ScenarioConfig {
    ScenarioConfig {
        rf_oscillator: rf_starting_at(CHANNEL_11_HZ, -850.0),
        chipping_oscillator: chipping_starting_at(8000.0),
        temperature: TemperatureProfile::constant(25.0),
        duration_s: 300.0,
        ..ScenarioConfig::default()
    }
}

/// Cold start at 25 °C in the chamber, then a 2 °C/min ramp over 15 °C with
/// a 3 s beacon outage during the ramp. Both fine loops run.
pub fn temperature_ramp() -> ScenarioConfig {
    let hold_s = 120.0;
    let ramp_s = 15.0 / 2.0 * 60.0;
    let temperature = in_chamber(TemperatureProfile::piecewise(vec![
        (0.0, 25.0),
        (hold_s, 25.0),
        (hold_s + ramp_s, 40.0),
    ]));
    let mut cfg = ScenarioConfig {
        temperature,
        duration_s: hold_s + ramp_s + 180.0,
        ..lab_startup()
    };
    cfg.receiver.loss_bursts = vec![(300.0, 303.0)];
    cfg
}

/// Free-running clocks at their nominal settings in a constant-temperature
/// chamber for seven hours.
pub fn stability() -> ScenarioConfig {
    ScenarioConfig {
        rf_oscillator: rf_on_grid(CHANNEL_11_HZ),
        chipping_oscillator: chipping_starting_at(0.0),
        temperature: in_chamber(TemperatureProfile::constant(25.0)),
        calibrator: CalibratorConfig {
            enabled: false,
            ..CalibratorConfig::default()
        },
        duration_s: 7.0 * 3600.0,
        ..ScenarioConfig::default()
    }
}

/// Free-running clocks through a 10 °C ramp at 2 °C/min, then held.
pub fn open_loop_drift() -> ScenarioConfig {
    ScenarioConfig {
        temperature: TemperatureProfile::ramp(25.0, 2.0, 10.0),
        duration_s: 400.0,
        ..stability()
    }
}

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 4] = ["lab_startup", "temperature_ramp", "stability", "open_loop_drift"];

pub fn by_name(name: &str) -> Option<ScenarioConfig> {
    match name {
        "lab_startup" => Some(lab_startup()),
        "temperature_ramp" => Some(temperature_ramp()),
        "stability" => Some(stability()),
        "open_loop_drift" => Some(open_loop_drift()),
        _ => None,
    }
}
