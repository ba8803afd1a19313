//! Beacon source and receiver front end.
//!
//! A beacon is only a carrier at an instant; frame contents are not modelled.
//! The receiver decodes it (CRC OK) when its local oscillator sits within the
//! capture half-width of the carrier and the beacon is not dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_period_s() -> f64 {
    0.125
}

fn default_tx_ppm_error() -> f64 {
    10.0
}

fn default_channel_bandwidth_hz() -> f64 {
    2_000_000.0
}

/// Crystal-referenced join proxy emitting periodic beacons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconSource {
    pub f_c_hz: f64,
    #[serde(default = "default_period_s")]
    pub period_s: f64,
    #[serde(default = "default_tx_ppm_error")]
    pub tx_ppm_error: f64,
    #[serde(default = "default_channel_bandwidth_hz")]
    pub channel_bandwidth_hz: f64,
    /// Time of the first beacon.
    #[serde(default)]
    pub phase_offset_s: f64,
}

impl BeaconSource {
    pub fn new(f_c_hz: f64) -> Self {
        Self {
            f_c_hz,
            period_s: default_period_s(),
            tx_ppm_error: default_tx_ppm_error(),
            channel_bandwidth_hz: default_channel_bandwidth_hz(),
            phase_offset_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period_s > 0.0) {
            return Err(Error::Config("beacon period_s must be > 0".into()));
        }
        if !(self.tx_ppm_error.abs() <= 40.0) {
            return Err(Error::Config(format!(
                "beacon source error {} ppm exceeds the ±40 ppm the standard allows",
                self.tx_ppm_error
            )));
        }
        if !(self.f_c_hz > 0.0) || !(self.channel_bandwidth_hz > 0.0) {
            return Err(Error::Config("beacon frequencies must be positive".into()));
        }
        if !(self.phase_offset_s >= 0.0) {
            return Err(Error::Config("phase_offset_s must be >= 0".into()));
        }
        Ok(())
    }

    /// Actual transmitted carrier, including the source's crystal error.
    pub fn carrier_hz(&self) -> f64 {
        self.f_c_hz * (1.0 + self.tx_ppm_error * 1e-6)
    }

    /// Actual beacon spacing as clocked by the source's crystal.
    pub fn step_s(&self) -> f64 {
        self.period_s * (1.0 + self.tx_ppm_error * 1e-6)
    }

    /// Time of the `index`-th beacon.
    pub fn beacon_time(&self, index: u64) -> f64 {
        self.phase_offset_s + index as f64 * self.step_s()
    }
}

/// Beacon instants in `[phase_offset, horizon_s)`.
pub fn beacon_times(src: &BeaconSource, horizon_s: f64) -> Vec<f64> {
    (0u64..)
        .map(|k| src.beacon_time(k))
        .take_while(|&t| t < horizon_s)
        .collect()
}

fn default_capture_halfwidth_hz() -> f64 {
    700_000.0
}

fn default_if_nominal_hz() -> f64 {
    2_500_000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverModel {
    #[serde(default = "default_capture_halfwidth_hz")]
    pub capture_halfwidth_hz: f64,
    #[serde(default = "default_if_nominal_hz")]
    pub if_nominal_hz: f64,
    #[serde(default)]
    pub loss_prob: f64,
    /// Half-open `[start_s, end_s)` windows in which every beacon is lost.
    #[serde(default)]
    pub loss_bursts: Vec<(f64, f64)>,
}

impl Default for ReceiverModel {
    fn default() -> Self {
        Self {
            capture_halfwidth_hz: default_capture_halfwidth_hz(),
            if_nominal_hz: default_if_nominal_hz(),
            loss_prob: 0.0,
            loss_bursts: Vec::new(),
        }
    }
}

impl ReceiverModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(Error::Config(format!(
                "loss_prob must be in [0, 1], got {}",
                self.loss_prob
            )));
        }
        if !(self.capture_halfwidth_hz > 0.0) {
            return Err(Error::Config("capture_halfwidth_hz must be > 0".into()));
        }
        if self.loss_bursts.iter().any(|&(a, b)| !(b > a)) {
            return Err(Error::Config("loss burst end must be after its start".into()));
        }
        Ok(())
    }

    pub fn in_loss_burst(&self, t_s: f64) -> bool {
        self.loss_bursts.iter().any(|&(a, b)| t_s >= a && t_s < b)
    }
}

/// Outcome of one beacon reception attempt. Measurements are `None` whenever
/// they are not valid for this beacon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptionReport {
    pub crc_ok: bool,
    /// Measured IF minus nominal IF.
    pub if_offset_hz: Option<f64>,
    /// Chipping ticks since the previous beacon, only when both were received.
    pub ticks_since_last_rx: Option<u64>,
    pub rx_time_s: f64,
}

/// Decides whether the beacon sent at `t_s` is decoded by a receiver whose
/// LO is at `rx_rf_freq_hz`.
///
/// The LO is assumed to sit below the carrier (low-side injection), so the
/// measured IF is `carrier - LO` and its offset from nominal is positive when
/// the LO runs low.
pub fn attempt_reception(
    rx_rf_freq_hz: f64,
    src: &BeaconSource,
    rx: &ReceiverModel,
    t_s: f64,
    loss_sample: f64,
) -> ReceptionReport {
    let carrier = src.carrier_hz();
    let tuning_error = rx_rf_freq_hz - carrier;
    let in_band = tuning_error.abs() <= rx.capture_halfwidth_hz;
    let crc_ok = in_band && loss_sample >= rx.loss_prob && !rx.in_loss_burst(t_s);
    ReceptionReport {
        crc_ok,
        if_offset_hz: crc_ok.then_some(-tuning_error),
        ticks_since_last_rx: None,
        rx_time_s: t_s,
    }
}

/// Free-running chipping counter.
///
/// Keeps the accumulated phase (in ticks) of a piecewise-constant frequency.
/// Counts between two instants are `round(phase(to)) - round(phase(from))`, so
/// they add up exactly over adjacent intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickCounter {
    time_s: f64,
    phase_ticks: f64,
}

impl TickCounter {
    pub fn new(start_s: f64) -> Self {
        Self {
            time_s: start_s,
            phase_ticks: 0.0,
        }
    }

    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    pub fn phase_ticks(&self) -> f64 {
        self.phase_ticks
    }

    /// Integrates `freq_hz` from the current time up to `t_s`.
    pub fn advance(&mut self, t_s: f64, freq_hz: f64) {
        if t_s > self.time_s {
            self.phase_ticks += freq_hz * (t_s - self.time_s);
            self.time_s = t_s;
        }
    }

    /// Latched counter value.
    pub fn count(&self) -> i64 {
        self.phase_ticks.round() as i64
    }
}

/// Ticks of a piecewise-constant frequency between `from_s` and `to_s`.
///
/// `series` holds `(start_s, freq_hz)` pairs sorted by time; each frequency
/// holds until the next start and the last one holds indefinitely.
pub fn count_ticks(series: &[(f64, f64)], from_s: f64, to_s: f64) -> Result<u64> {
    if !(to_s > from_s) {
        return Err(Error::Domain(format!("empty counting interval [{from_s}, {to_s}]")));
    }
    let Some(&(origin, _)) = series.first() else {
        return Err(Error::Domain("empty frequency series".into()));
    };
    if from_s < origin {
        return Err(Error::Domain(format!(
            "interval starts at {from_s} s before the series at {origin} s"
        )));
    }
    if series.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Domain("series start times must be strictly increasing".into()));
    }
    let mut counter = TickCounter::new(origin);
    let mut latched_from = None;
    for (i, &(start, freq)) in series.iter().enumerate() {
        let end = series.get(i + 1).map_or(f64::INFINITY, |s| s.0);
        if latched_from.is_none() && from_s < end {
            counter.advance(from_s, freq);
            latched_from = Some(counter.count());
        }
        if to_s <= end {
            counter.advance(to_s, freq);
            break;
        }
        counter.advance(end, freq);
        debug_assert!(start <= end);
    }
    let from_count = latched_from.expect("from_s lies inside the series");
    Ok((counter.count() - from_count).max(0) as u64)
}
