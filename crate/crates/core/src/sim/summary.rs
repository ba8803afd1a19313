use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::trace::TraceRecord;

/// RF error limit the standard sets on a transmitter.
pub const RF_LIMIT_PPM: f64 = 40.0;

/// Headline statistics of one run. Unless `never_locked` is set they cover
/// only the rows after the first lock event; otherwise the whole trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_to_lock_s: Option<f64>,
    pub never_locked: bool,
    pub samples: usize,
    pub post_lock_rf_ppm_max: f64,
    pub post_lock_rf_ppm_2sigma: f64,
    pub post_lock_chip_ppm_max: f64,
    pub post_lock_chip_ppm_2sigma: f64,
    pub fraction_samples_within_40ppm: f64,
    pub fraction_within_window: f64,
    pub beacons_rx: u64,
    pub beacons_lost: u64,
}

impl RunSummary {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Trace(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Trace(e.to_string()))
    }
}

/// Twice the sample standard deviation; 0 for fewer than two values.
pub fn two_sigma(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    2.0 * var.sqrt()
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn fraction_within(values: &[f64], limit: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|v| v.abs() <= limit).count() as f64 / values.len() as f64
}

/// Computes the summary of `trace` from the rows following the first row
/// carrying `lock_event`.
pub fn summarize(trace: &[TraceRecord], lock_event: &str, window_ppm: f64) -> Result<RunSummary> {
    let last = trace
        .last()
        .ok_or_else(|| Error::Precondition("cannot summarize an empty trace".into()))?;
    let lock_idx = trace.iter().position(|r| r.has_event(lock_event));
    let rows = match lock_idx {
        Some(i) => &trace[i + 1..],
        None => trace,
    };
    let rf: Vec<f64> = rows.iter().map(|r| r.rf_ppm).collect();
    let chip: Vec<f64> = rows.iter().map(|r| r.chip_ppm).collect();
    Ok(RunSummary {
        time_to_lock_s: lock_idx.map(|i| trace[i].time_s),
        never_locked: lock_idx.is_none(),
        samples: rows.len(),
        post_lock_rf_ppm_max: max_abs(&rf),
        post_lock_rf_ppm_2sigma: two_sigma(&rf),
        post_lock_chip_ppm_max: max_abs(&chip),
        post_lock_chip_ppm_2sigma: two_sigma(&chip),
        fraction_samples_within_40ppm: fraction_within(&rf, RF_LIMIT_PPM),
        fraction_within_window: fraction_within(&chip, window_ppm),
        beacons_rx: last.beacons_rx_total,
        beacons_lost: last.beacons_lost_total,
    })
}
