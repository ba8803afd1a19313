use std::collections::VecDeque;

use crate::calibration::StepAction;
use crate::clock::ppm_error;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChippingMode {
    Uncalibrated,
    FastDone,
    FineTracking,
}

/// Chipping clock calibrator driven by tick counts between consecutive beacons.
#[derive(Debug, Clone, PartialEq)]
pub struct ChippingCalState {
    pub tick_history: VecDeque<u64>,
    pub window_len: usize,
    /// Ticks an ideal 2 MHz clock counts over one beacon interval.
    pub ticks_ideal: f64,
    pub window_ppm: f64,
    /// Change in tick count per beacon interval for one setting step
    /// (`delta_f_hz * T_b`).
    pub delta_ticks_per_step: f64,
    pub mode: ChippingMode,
    /// Decide after every new count once `window_len` are held, instead of on
    /// disjoint batches.
    pub sliding: bool,
}

impl ChippingCalState {
    pub fn new(
        chip_rate_hz: f64,
        beacon_period_s: f64,
        delta_f_hz: f64,
        window_len: usize,
        window_ppm: f64,
    ) -> Result<Self> {
        let cal = Self {
            tick_history: VecDeque::with_capacity(window_len),
            window_len,
            ticks_ideal: chip_rate_hz * beacon_period_s,
            window_ppm,
            delta_ticks_per_step: delta_f_hz * beacon_period_s,
            mode: ChippingMode::Uncalibrated,
            sliding: false,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 {
            return Err(Error::Config("fine calibration window length must be >= 1".into()));
        }
        if !(self.window_ppm > 0.0) {
            return Err(Error::Config("window_ppm must be > 0".into()));
        }
        if !(self.ticks_ideal > 0.0) {
            return Err(Error::Config("ideal tick count must be > 0".into()));
        }
        Ok(())
    }

    /// Appends a count from a consecutive CRC-OK beacon pair. The ring keeps
    /// the last `window_len` counts.
    pub fn record(&mut self, ticks: u64) {
        if self.tick_history.len() == self.window_len {
            self.tick_history.pop_front();
        }
        self.tick_history.push_back(ticks);
    }

    pub fn window_full(&self) -> bool {
        self.tick_history.len() >= self.window_len
    }

    /// Error of one interval's count, in ppm of the ideal.
    pub fn count_ppm(&self, ticks: f64) -> Result<f64> {
        Ok(ppm_error(ticks, self.ticks_ideal)?.value())
    }
}

/// `round(-(measured - ideal) / delta_ticks_per_step)`.
pub fn fast_calibrate(ticks_measured: u64, cal: &mut ChippingCalState) -> Result<i64> {
    if !(cal.delta_ticks_per_step > 0.0) {
        return Err(Error::Config(format!(
            "delta_ticks_per_step must be > 0, got {}",
            cal.delta_ticks_per_step
        )));
    }
    let correction = (-(ticks_measured as f64 - cal.ticks_ideal) / cal.delta_ticks_per_step).round() as i64;
    cal.mode = ChippingMode::FastDone;
    cal.tick_history.clear();
    Ok(correction)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineDecision {
    pub action: StepAction,
    /// Mean error of the window that was judged.
    pub mean_ppm: f64,
}

/// Compares the mean count of the window against `±window_ppm` and asks for a
/// one-step correction against the sign of the error when outside.
pub fn fine_calibrate(cal: &mut ChippingCalState) -> Result<FineDecision> {
    if !cal.window_full() {
        return Err(Error::Precondition(format!(
            "fine calibration needs {} counts, have {}",
            cal.window_len,
            cal.tick_history.len()
        )));
    }
    let mean = cal.tick_history.iter().map(|&t| t as f64).sum::<f64>() / cal.tick_history.len() as f64;
    let mean_ppm = cal.count_ppm(mean)?;
    let action = if mean_ppm.abs() > cal.window_ppm {
        StepAction::Step(if mean_ppm > 0.0 { -1 } else { 1 })
    } else {
        StepAction::Hold
    };
    cal.mode = ChippingMode::FineTracking;
    // counts taken before a step no longer describe the clock
    if !cal.sliding || action != StepAction::Hold {
        cal.tick_history.clear();
    }
    Ok(FineDecision { action, mean_ppm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_cal() -> ChippingCalState {
        // 800 Hz steps over a 125 ms interval: 100 ticks per step
        ChippingCalState::new(2e6, 0.125, 800.0, 10, 400.0).unwrap()
    }

    #[test]
    fn fast_correction_examples() {
        let mut cal = paper_cal();
        assert_eq!(cal.ticks_ideal, 250_000.0);
        assert_eq!(cal.delta_ticks_per_step, 100.0);
        assert_eq!(fast_calibrate(250_000, &mut cal).unwrap(), 0);
        assert_eq!(cal.mode, ChippingMode::FastDone);
        assert_eq!(fast_calibrate(252_000, &mut cal).unwrap(), -20);
        assert_eq!(fast_calibrate(249_000, &mut cal).unwrap(), 10);
    }

    #[test]
    fn fast_correction_rejects_zero_step() {
        let mut cal = paper_cal();
        cal.delta_ticks_per_step = 0.0;
        assert!(matches!(fast_calibrate(250_000, &mut cal), Err(Error::Config(_))));
    }

    fn fill(cal: &mut ChippingCalState, ticks: u64) {
        for _ in 0..cal.window_len {
            cal.record(ticks);
        }
    }

    #[test]
    fn fine_examples() {
        let mut cal = paper_cal();
        fill(&mut cal, 250_000);
        assert_eq!(fine_calibrate(&mut cal).unwrap().action, StepAction::Hold);
        assert!(cal.tick_history.is_empty());

        fill(&mut cal, 250_150);
        let d = fine_calibrate(&mut cal).unwrap();
        assert_eq!(d.action, StepAction::Step(-1));
        assert!((d.mean_ppm - 600.0).abs() < 1e-9);

        fill(&mut cal, 249_950);
        let d = fine_calibrate(&mut cal).unwrap();
        assert_eq!(d.action, StepAction::Hold);
        assert!((d.mean_ppm + 200.0).abs() < 1e-9);

        fill(&mut cal, 249_850);
        assert_eq!(fine_calibrate(&mut cal).unwrap().action, StepAction::Step(1));
        assert_eq!(cal.mode, ChippingMode::FineTracking);
    }

    #[test]
    fn fine_needs_full_window() {
        let mut cal = paper_cal();
        for _ in 0..9 {
            cal.record(250_000);
        }
        assert!(matches!(fine_calibrate(&mut cal), Err(Error::Precondition(_))));
    }

    #[test]
    fn ring_keeps_last_n() {
        let mut cal = paper_cal();
        for t in 0..25u64 {
            cal.record(250_000 + t);
        }
        assert_eq!(cal.tick_history.len(), 10);
        assert_eq!(cal.tick_history.front(), Some(&250_015));
    }

    #[test]
    fn sliding_window_keeps_history_on_hold() {
        let mut cal = paper_cal();
        cal.sliding = true;
        fill(&mut cal, 250_000);
        fine_calibrate(&mut cal).unwrap();
        assert_eq!(cal.tick_history.len(), 10);
        cal.record(250_000);
        assert!(cal.window_full());
    }

    #[test]
    fn invalid_state() {
        assert!(ChippingCalState::new(2e6, 0.125, 800.0, 0, 400.0).is_err());
        assert!(ChippingCalState::new(2e6, 0.125, 800.0, 10, 0.0).is_err());
    }
}
