//! Device-side calibration: cold-start channel sweep, chipping clock
//! fast/fine calibration and IF-feedback RF tracking.

mod chipping;
mod sweep;
mod tracking;

pub use chipping::{fast_calibrate, fine_calibrate, ChippingCalState, ChippingMode, FineDecision};
pub use sweep::{select_best_setting, sweep_step, SweepAction, SweepPhase, SweepState, DEFAULT_SILENCE_SPAN_HZ};
pub use tracking::{if_track, RfTrackState};

use crate::error::{Error, Result};

/// One-step tuning command issued by a fine loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    Step(i8),
    Hold,
}

impl StepAction {
    pub fn delta(self) -> i64 {
        match self {
            StepAction::Step(d) => d as i64,
            StepAction::Hold => 0,
        }
    }
}

/// Shortest dwell that still spans two true beacon periods when the local
/// timekeeping clock is off by up to `timekeeping_ppm`, rounded up to 10 ms.
pub fn required_listen_duration(t_b_s: f64, timekeeping_ppm: f64) -> Result<f64> {
    if !(t_b_s > 0.0) {
        return Err(Error::Domain(format!("beacon interval must be > 0, got {t_b_s}")));
    }
    let e = timekeeping_ppm.abs() * 1e-6;
    if e >= 1.0 {
        return Err(Error::Domain(format!(
            "timekeeping error {timekeeping_ppm} ppm is not a clock"
        )));
    }
    let raw = 2.0 * t_b_s / (1.0 - e);
    // 1e-9 guards against 0.25 / 0.01 landing a hair above 25
    Ok(((raw * 100.0) - 1e-9).ceil() / 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Smallest dwell, on a 10 ms grid, whose worst-case true span covers two
    /// beacon periods. Found by walking the grid.
    fn listen_oracle(t_b: f64, ppm: f64) -> f64 {
        (1..100_000)
            .map(|k| k as f64 / 100.0)
            .find(|t| t * (1.0 - ppm * 1e-6) >= 2.0 * t_b - 1e-12)
            .unwrap()
    }

    #[test]
    fn listen_duration_examples() {
        assert_eq!(required_listen_duration(0.125, 0.0).unwrap(), 0.25);
        let paper = required_listen_duration(0.125, 10_000.0).unwrap();
        assert!(paper <= 1.0);
        let slow = required_listen_duration(0.5, 10_000.0).unwrap();
        assert!(slow >= 1.02 - 1e-12, "{slow}");
        assert_eq!(slow, 1.02);
    }

    #[test]
    fn listen_duration_matches_grid_search() {
        for &(t_b, ppm) in &[
            (0.125, 0.0),
            (0.125, 10_000.0),
            (0.5, 10_000.0),
            (0.2, 50_000.0),
            (1.0, 3_000.0),
        ] {
            let got = required_listen_duration(t_b, ppm).unwrap();
            assert!((got - listen_oracle(t_b, ppm)).abs() < 1e-9, "{t_b} {ppm}: {got}");
        }
    }

    #[test]
    fn listen_duration_rejects_bad_period() {
        assert!(required_listen_duration(0.0, 0.0).is_err());
    }
}
