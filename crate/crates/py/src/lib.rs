//! Python bindings for the `xtalfree` simulator and calibration algorithms.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use xtalfree::airlink::{self, BeaconSource, ReceiverModel, ReceptionReport};
use xtalfree::calibration::{self, ChippingCalState, RfTrackState, StepAction};
use xtalfree::clock::{self, NoiseModel, CHANNEL_11_HZ, CHIP_RATE_HZ};
use xtalfree::environment;
use xtalfree::sim::{self, presets, RunSummary, ScenarioConfig};
use xtalfree::Error;

create_exception!(
    xtalfree,
    SweepFailure,
    PyRuntimeError,
    "Channel sweep ended without hearing a beacon."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::SweepFailure { .. } => SweepFailure::new_err(e.to_string()),
        Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn noise_model_name(m: NoiseModel) -> &'static str {
    match m {
        NoiseModel::White => "white",
        NoiseModel::RandomWalk => "random_walk",
    }
}

/// Setting-indexed oscillator with temperature coefficient and noise.
#[pyclass(name = "TunableOscillator", module = "xtalfree", skip_from_py_object)]
#[derive(Clone)]
struct PyOscillator {
    inner: clock::TunableOscillator,
}

#[pymethods]
impl PyOscillator {
    /// RF local oscillator on a 90 kHz grid around `f_nominal_hz`.
    #[staticmethod]
    #[pyo3(signature = (f_nominal_hz = CHANNEL_11_HZ))]
    fn rf(f_nominal_hz: f64) -> Self {
        Self {
            inner: clock::TunableOscillator::rf(f_nominal_hz),
        }
    }

    /// 2 MHz chipping clock on an 800 Hz grid, set to exactly 2 MHz.
    #[staticmethod]
    fn chipping() -> Self {
        Self {
            inner: clock::TunableOscillator::chipping(),
        }
    }

    #[getter]
    fn setting(&self) -> u32 {
        self.inner.setting
    }

    #[setter]
    fn set_setting(&mut self, value: u32) -> PyResult<()> {
        if value > self.inner.max_setting {
            return Err(to_py(Error::RangeViolation {
                setting: value as i64,
                max_setting: self.inner.max_setting,
            }));
        }
        self.inner.setting = value;
        Ok(())
    }

    #[getter]
    fn max_setting(&self) -> u32 {
        self.inner.max_setting
    }

    #[getter]
    fn f_nominal_hz(&self) -> f64 {
        self.inner.f_nominal_hz
    }

    #[getter]
    fn f_at_min_setting_hz(&self) -> f64 {
        self.inner.f_at_min_setting_hz
    }

    #[getter]
    fn delta_f_hz(&self) -> f64 {
        self.inner.delta_f_hz
    }

    #[getter]
    fn tempco_ppm_per_c(&self) -> f64 {
        self.inner.tempco_ppm_per_c
    }

    #[getter]
    fn t_ref_c(&self) -> f64 {
        self.inner.t_ref_c
    }

    #[getter]
    fn noise_sigma_ppm(&self) -> f64 {
        self.inner.noise_sigma_ppm
    }

    #[setter]
    fn set_noise_sigma_ppm(&mut self, value: f64) {
        self.inner.noise_sigma_ppm = value;
    }

    #[getter]
    fn noise_model(&self) -> &'static str {
        noise_model_name(self.inner.noise_model)
    }

    fn base_frequency(&self, setting: u32) -> f64 {
        self.inner.base_frequency(setting)
    }

    /// Frequency at `temp_c` with a caller-drawn noise sample in ppm.
    #[pyo3(signature = (temp_c, noise_sample_ppm = 0.0))]
    fn synthesize(&self, temp_c: f64, noise_sample_ppm: f64) -> PyResult<f64> {
        clock::synthesize_frequency(&self.inner, temp_c, noise_sample_ppm).map_err(to_py)
    }

    /// Moves the setting by `delta`, clamped to the grid. Returns
    /// `(setting, saturated)`.
    fn step(&mut self, delta: i64) -> (u32, bool) {
        let outcome = self.inner.step(delta);
        (outcome.setting, outcome.saturated)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "TunableOscillator(f_nominal_hz={}, setting={}, max_setting={}, delta_f_hz={})",
            self.inner.f_nominal_hz, self.inner.setting, self.inner.max_setting, self.inner.delta_f_hz
        )
    }
}

/// Chamber temperature programme.
#[pyclass(name = "TemperatureProfile", module = "xtalfree", skip_from_py_object)]
#[derive(Clone)]
struct PyProfile {
    inner: environment::TemperatureProfile,
}

#[pymethods]
impl PyProfile {
    #[staticmethod]
    fn constant(temp_c: f64) -> Self {
        Self {
            inner: environment::TemperatureProfile::constant(temp_c),
        }
    }

    #[staticmethod]
    fn ramp(base_temp_c: f64, rate_c_per_min: f64, span_c: f64) -> Self {
        Self {
            inner: environment::TemperatureProfile::ramp(base_temp_c, rate_c_per_min, span_c),
        }
    }

    #[staticmethod]
    fn piecewise(segments: Vec<(f64, f64)>) -> PyResult<Self> {
        let inner = environment::TemperatureProfile::piecewise(segments);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Copy with chamber jitter half-width and set-point error.
    fn with_chamber(&self, stability_c: f64, set_error_fraction: f64) -> PyResult<Self> {
        let inner = self.inner.clone().with_chamber(stability_c, set_error_fraction);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn ideal_at(&self, t_s: f64) -> PyResult<f64> {
        self.inner.ideal_at(t_s).map_err(to_py)
    }

    #[pyo3(signature = (t_s, jitter_sample_c = 0.0))]
    fn temperature_at(&self, t_s: f64, jitter_sample_c: f64) -> PyResult<f64> {
        environment::temperature_at(&self.inner, t_s, jitter_sample_c).map_err(to_py)
    }
}

#[pyfunction]
fn ppm_error(f_hz: f64, f_ref_hz: f64) -> PyResult<f64> {
    clock::ppm_error(f_hz, f_ref_hz).map(|p| p.value()).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (osc, temp_c, noise_sample_ppm = 0.0))]
fn synthesize_frequency(osc: PyRef<'_, PyOscillator>, temp_c: f64, noise_sample_ppm: f64) -> PyResult<f64> {
    clock::synthesize_frequency(&osc.inner, temp_c, noise_sample_ppm).map_err(to_py)
}

/// One reception attempt. Returns `{"crc_ok": bool, "if_offset_hz": float | None}`.
#[pyfunction]
#[pyo3(signature = (
    rx_rf_freq_hz,
    t_s = 0.0,
    loss_sample = 1.0,
    f_c_hz = CHANNEL_11_HZ,
    tx_ppm_error = 10.0,
    capture_halfwidth_hz = 700_000.0,
    loss_prob = 0.0,
    loss_bursts = Vec::new(),
))]
#[allow(clippy::too_many_arguments)]
fn attempt_reception<'py>(
    py: Python<'py>,
    rx_rf_freq_hz: f64,
    t_s: f64,
    loss_sample: f64,
    f_c_hz: f64,
    tx_ppm_error: f64,
    capture_halfwidth_hz: f64,
    loss_prob: f64,
    loss_bursts: Vec<(f64, f64)>,
) -> PyResult<Bound<'py, PyDict>> {
    let src = BeaconSource {
        tx_ppm_error,
        ..BeaconSource::new(f_c_hz)
    };
    src.validate().map_err(to_py)?;
    let rx = ReceiverModel {
        capture_halfwidth_hz,
        loss_prob,
        loss_bursts,
        ..ReceiverModel::default()
    };
    rx.validate().map_err(to_py)?;
    let report = airlink::attempt_reception(rx_rf_freq_hz, &src, &rx, t_s, loss_sample);
    let d = PyDict::new(py);
    d.set_item("crc_ok", report.crc_ok)?;
    d.set_item("if_offset_hz", report.if_offset_hz)?;
    Ok(d)
}

/// Ticks of a piecewise-constant frequency `[(start_s, freq_hz), ...]` in `[from_s, to_s]`.
#[pyfunction]
fn count_ticks(series: Vec<(f64, f64)>, from_s: f64, to_s: f64) -> PyResult<u64> {
    airlink::count_ticks(&series, from_s, to_s).map_err(to_py)
}

#[pyfunction]
fn required_listen_duration(t_b_s: f64, timekeeping_ppm: f64) -> PyResult<f64> {
    calibration::required_listen_duration(t_b_s, timekeeping_ppm).map_err(to_py)
}

/// Setting correction from one interval's tick count.
#[pyfunction]
#[pyo3(signature = (ticks_measured, chip_rate_hz = CHIP_RATE_HZ, beacon_period_s = 0.125, delta_f_hz = 800.0))]
fn fast_calibrate(ticks_measured: u64, chip_rate_hz: f64, beacon_period_s: f64, delta_f_hz: f64) -> PyResult<i64> {
    let mut cal = ChippingCalState::new(chip_rate_hz, beacon_period_s, delta_f_hz, 1, 1.0).map_err(to_py)?;
    calibration::fast_calibrate(ticks_measured, &mut cal).map_err(to_py)
}

/// Judges a full window of counts. Returns `(step, mean_ppm)` with step in {-1, 0, 1}.
#[pyfunction]
#[pyo3(signature = (ticks, window_ppm = 400.0, chip_rate_hz = CHIP_RATE_HZ, beacon_period_s = 0.125, delta_f_hz = 800.0))]
fn fine_calibrate(
    ticks: Vec<u64>,
    window_ppm: f64,
    chip_rate_hz: f64,
    beacon_period_s: f64,
    delta_f_hz: f64,
) -> PyResult<(i64, f64)> {
    let mut cal = ChippingCalState::new(
        chip_rate_hz,
        beacon_period_s,
        delta_f_hz,
        ticks.len().max(1),
        window_ppm,
    )
    .map_err(to_py)?;
    for t in ticks {
        cal.record(t);
    }
    let d = calibration::fine_calibrate(&mut cal).map_err(to_py)?;
    Ok((d.action.delta(), d.mean_ppm))
}

/// RF step (-1, 0 or 1) for a measured IF offset.
#[pyfunction]
#[pyo3(signature = (if_offset_hz, deadband_hz = 45_000.0, rf_delta_f_hz = 90_000.0))]
fn if_track(if_offset_hz: f64, deadband_hz: f64, rf_delta_f_hz: f64) -> PyResult<i64> {
    let track = RfTrackState::new(deadband_hz, rf_delta_f_hz).map_err(to_py)?;
    let report = ReceptionReport {
        crc_ok: true,
        if_offset_hz: Some(if_offset_hz),
        ticks_since_last_rx: None,
        rx_time_s: 0.0,
    };
    Ok(match calibration::if_track(&report, &track).map_err(to_py)? {
        StepAction::Step(d) => d as i64,
        StepAction::Hold => 0,
    })
}

/// Best setting from `{setting: crc_ok_count}`, or None when nothing was heard.
#[pyfunction]
fn select_best_setting(counts: BTreeMap<u32, u32>) -> Option<u32> {
    calibration::select_best_setting(&counts)
}

/// Scenario file text of a built-in scenario.
#[pyfunction]
fn preset(name: &str) -> PyResult<String> {
    let cfg = presets::by_name(name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown preset {name}; choose from {:?}", presets::NAMES)))?;
    cfg.to_toml_string().map_err(to_py)
}

fn summary_dict<'py>(py: Python<'py>, s: &RunSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("time_to_lock_s", s.time_to_lock_s)?;
    d.set_item("never_locked", s.never_locked)?;
    d.set_item("samples", s.samples)?;
    d.set_item("post_lock_rf_ppm_max", s.post_lock_rf_ppm_max)?;
    d.set_item("post_lock_rf_ppm_2sigma", s.post_lock_rf_ppm_2sigma)?;
    d.set_item("post_lock_chip_ppm_max", s.post_lock_chip_ppm_max)?;
    d.set_item("post_lock_chip_ppm_2sigma", s.post_lock_chip_ppm_2sigma)?;
    d.set_item("fraction_samples_within_40ppm", s.fraction_samples_within_40ppm)?;
    d.set_item("fraction_within_window", s.fraction_within_window)?;
    d.set_item("beacons_rx", s.beacons_rx)?;
    d.set_item("beacons_lost", s.beacons_lost)?;
    Ok(d)
}

/// Runs a scenario given as scenario-file text.
///
/// Returns `{"summary": dict, "trace": dict of column lists, "csv": str}`.
#[pyfunction]
#[pyo3(signature = (scenario, seed = None, duration_s = None))]
fn run_scenario<'py>(
    py: Python<'py>,
    scenario: &str,
    seed: Option<u64>,
    duration_s: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = ScenarioConfig::from_toml_str(scenario).map_err(to_py)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(d) = duration_s {
        cfg.duration_s = d;
    }
    let out = py.detach(|| sim::run_scenario(&cfg)).map_err(|f| to_py(f.error))?;
    let t = &out.trace;
    let cols = PyDict::new(py);
    cols.set_item("time_s", t.iter().map(|r| r.time_s).collect::<Vec<_>>())?;
    cols.set_item("temp_c", t.iter().map(|r| r.temp_c).collect::<Vec<_>>())?;
    cols.set_item("rf_setting", t.iter().map(|r| r.rf_setting).collect::<Vec<_>>())?;
    cols.set_item("rf_freq_hz", t.iter().map(|r| r.rf_freq_hz).collect::<Vec<_>>())?;
    cols.set_item("rf_ppm", t.iter().map(|r| r.rf_ppm).collect::<Vec<_>>())?;
    cols.set_item("chip_setting", t.iter().map(|r| r.chip_setting).collect::<Vec<_>>())?;
    cols.set_item("chip_freq_hz", t.iter().map(|r| r.chip_freq_hz).collect::<Vec<_>>())?;
    cols.set_item("chip_ppm", t.iter().map(|r| r.chip_ppm).collect::<Vec<_>>())?;
    cols.set_item(
        "beacons_rx_total",
        t.iter().map(|r| r.beacons_rx_total).collect::<Vec<_>>(),
    )?;
    cols.set_item(
        "beacons_lost_total",
        t.iter().map(|r| r.beacons_lost_total).collect::<Vec<_>>(),
    )?;
    cols.set_item("event", t.iter().map(|r| r.event.as_str()).collect::<Vec<_>>())?;
    let d = PyDict::new(py);
    d.set_item("summary", summary_dict(py, &out.summary)?)?;
    d.set_item("trace", cols)?;
    d.set_item("csv", sim::trace_to_string(t).map_err(to_py)?)?;
    Ok(d)
}

/// Summary of trace CSV text.
#[pyfunction]
#[pyo3(signature = (csv_text, lock_event = "SWEEP_FINISH", window_ppm = 400.0))]
fn summarize_csv<'py>(
    py: Python<'py>,
    csv_text: &str,
    lock_event: &str,
    window_ppm: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let trace = sim::read_trace(csv_text.as_bytes()).map_err(to_py)?;
    let s = sim::summarize(&trace, lock_event, window_ppm).map_err(to_py)?;
    summary_dict(py, &s)
}

#[pymodule]
#[pyo3(name = "xtalfree")]
fn xtalfree_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOscillator>()?;
    m.add_class::<PyProfile>()?;
    m.add("SweepFailure", m.py().get_type::<SweepFailure>())?;
    m.add("PRESETS", presets::NAMES.to_vec())?;
    m.add("TRACE_HEADER", sim::TRACE_HEADER.to_vec())?;
    m.add_function(wrap_pyfunction!(ppm_error, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(attempt_reception, m)?)?;
    m.add_function(wrap_pyfunction!(count_ticks, m)?)?;
    m.add_function(wrap_pyfunction!(required_listen_duration, m)?)?;
    m.add_function(wrap_pyfunction!(fast_calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(fine_calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(if_track, m)?)?;
    m.add_function(wrap_pyfunction!(select_best_setting, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(summarize_csv, m)?)?;
    Ok(())
}
