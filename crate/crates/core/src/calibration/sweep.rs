use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Silence past the last received setting that ends the sweep. Half of the
/// 2 MHz channel, so the far edge of the channel has been crossed.
pub const DEFAULT_SILENCE_SPAN_HZ: f64 = 1_000_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SweepPhase {
    BelowChannel,
    InChannel,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAction {
    Advance,
    Finish(u32),
}

/// Book-keeping for the cold-start beacon channel search.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepState {
    pub current_setting: u32,
    pub max_setting: u32,
    pub listen_duration_s: f64,
    pub per_setting_count: BTreeMap<u32, u32>,
    pub best_setting: Option<u32>,
    pub last_rx_setting: Option<u32>,
    pub silence_span_hz: f64,
    pub silence_threshold_hz: f64,
    pub phase: SweepPhase,
}

impl SweepState {
    pub fn new(start_setting: u32, max_setting: u32, listen_duration_s: f64) -> Self {
        Self {
            current_setting: start_setting,
            max_setting,
            listen_duration_s,
            per_setting_count: BTreeMap::new(),
            best_setting: None,
            last_rx_setting: None,
            silence_span_hz: 0.0,
            silence_threshold_hz: DEFAULT_SILENCE_SPAN_HZ,
            phase: SweepPhase::BelowChannel,
        }
    }

    /// Number of settings dwelled on so far.
    pub fn dwells(&self) -> usize {
        self.per_setting_count.len()
    }

    pub fn total_listen_time_s(&self) -> f64 {
        self.dwells() as f64 * self.listen_duration_s
    }
}

/// Feeds the CRC-OK count of the dwell that just ended at `current_setting`.
///
/// Returns `Advance` (the caller tunes one step up) until more than
/// `silence_threshold_hz` has passed without a beacon after the last setting
/// that heard one; then `Finish` with the best setting.
pub fn sweep_step(state: &mut SweepState, count_this_setting: u32, delta_f_hz: f64) -> Result<SweepAction> {
    if state.phase == SweepPhase::Done {
        return Err(Error::Precondition("sweep already finished".into()));
    }
    if !(delta_f_hz > 0.0) {
        return Err(Error::Config("delta_f_hz must be > 0".into()));
    }
    let here = state.current_setting;
    state.per_setting_count.insert(here, count_this_setting);
    if count_this_setting > 0 {
        state.last_rx_setting = Some(here);
        state.phase = SweepPhase::InChannel;
        state.best_setting = select_best_setting(&state.per_setting_count);
    }
    state.silence_span_hz = state
        .last_rx_setting
        .map_or(0.0, |last| (here - last) as f64 * delta_f_hz);

    if state.phase == SweepPhase::InChannel && state.silence_span_hz > state.silence_threshold_hz {
        return Ok(finish(state));
    }
    if here >= state.max_setting {
        if state.last_rx_setting.is_none() {
            return Err(Error::SweepFailure {
                max_setting: state.max_setting,
            });
        }
        return Ok(finish(state));
    }
    state.current_setting = here + 1;
    Ok(SweepAction::Advance)
}

fn finish(state: &mut SweepState) -> SweepAction {
    state.phase = SweepPhase::Done;
    let best = state.best_setting.expect("in-channel sweep has a best setting");
    SweepAction::Finish(best)
}

/// Setting with the highest beacon count. Ties go to the middle (rounded
/// down) of the longest run of consecutive settings sharing that count; equal
/// runs resolve to the lowest one.
pub fn select_best_setting(counts: &BTreeMap<u32, u32>) -> Option<u32> {
    let top = *counts.values().max()?;
    if top == 0 {
        return None;
    }
    let mut best: Option<(u32, u32)> = None;
    let mut run: Option<(u32, u32)> = None;
    for (&setting, &count) in counts {
        if count != top {
            run = None;
            continue;
        }
        run = match run {
            Some((lo, hi)) if hi + 1 == setting => Some((lo, setting)),
            _ => Some((setting, setting)),
        };
        let (lo, hi) = run.unwrap();
        if best.is_none_or(|(blo, bhi)| hi - lo > bhi - blo) {
            best = Some((lo, hi));
        }
    }
    best.map(|(lo, hi)| lo + (hi - lo) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(counts: &[u32], delta_f: f64) -> (Vec<SweepAction>, SweepState) {
        let mut st = SweepState::new(0, 1000, 1.0);
        let mut actions = Vec::new();
        for &c in counts {
            let a = sweep_step(&mut st, c, delta_f).unwrap();
            actions.push(a);
            if matches!(a, SweepAction::Finish(_)) {
                break;
            }
        }
        (actions, st)
    }

    #[test]
    fn silence_without_reception_never_finishes() {
        let (actions, st) = run(&[0; 20], 90_000.0);
        assert!(actions.iter().all(|a| *a == SweepAction::Advance));
        assert_eq!(st.phase, SweepPhase::BelowChannel);
        assert_eq!(st.current_setting, 20);
    }

    #[test]
    fn finishes_twelve_settings_after_last_reception() {
        let mut counts = vec![0u32; 5];
        counts.extend(std::iter::repeat_n(8, 22));
        counts.extend(std::iter::repeat_n(0, 30));
        let (actions, st) = run(&counts, 90_000.0);
        let finish_idx = actions
            .iter()
            .position(|a| matches!(a, SweepAction::Finish(_)))
            .unwrap();
        let last_rx = 5 + 22 - 1;
        assert_eq!(finish_idx, last_rx + 12);
        // 11 * 90 kHz = 990 kHz is not yet "more than 1 MHz"
        assert_eq!(actions[last_rx + 11], SweepAction::Advance);
        assert_eq!(actions[finish_idx], SweepAction::Finish(5 + 10));
        assert_eq!(st.phase, SweepPhase::Done);
        assert_eq!(st.dwells(), finish_idx + 1);
        assert_eq!(st.total_listen_time_s(), (finish_idx + 1) as f64);
    }

    #[test]
    fn saturation_before_reception_is_failure() {
        let mut st = SweepState::new(0, 3, 1.0);
        for _ in 0..3 {
            assert_eq!(sweep_step(&mut st, 0, 90_000.0).unwrap(), SweepAction::Advance);
        }
        assert!(matches!(
            sweep_step(&mut st, 0, 90_000.0),
            Err(Error::SweepFailure { max_setting: 3 })
        ));
    }

    #[test]
    fn saturation_after_reception_finishes() {
        let mut st = SweepState::new(0, 3, 1.0);
        sweep_step(&mut st, 0, 90_000.0).unwrap();
        sweep_step(&mut st, 4, 90_000.0).unwrap();
        sweep_step(&mut st, 8, 90_000.0).unwrap();
        assert_eq!(sweep_step(&mut st, 8, 90_000.0).unwrap(), SweepAction::Finish(2));
    }

    #[test]
    fn finished_sweep_rejects_more_input() {
        let mut st = SweepState::new(0, 3, 1.0);
        st.phase = SweepPhase::Done;
        assert!(sweep_step(&mut st, 1, 90_000.0).is_err());
    }

    #[test]
    fn tie_breaking() {
        let m = |v: &[(u32, u32)]| v.iter().copied().collect::<BTreeMap<_, _>>();
        assert_eq!(select_best_setting(&m(&[(0, 0), (1, 3)])), Some(1));
        assert_eq!(select_best_setting(&m(&[(3, 8), (4, 8), (5, 8), (6, 8)])), Some(4));
        // longest run wins over an isolated maximum
        assert_eq!(
            select_best_setting(&m(&[(1, 8), (2, 7), (3, 8), (4, 8), (5, 8)])),
            Some(4)
        );
        // equal runs: lowest
        assert_eq!(
            select_best_setting(&m(&[(1, 8), (2, 8), (3, 7), (4, 8), (5, 8)])),
            Some(1)
        );
        assert_eq!(select_best_setting(&m(&[(1, 0)])), None);
        assert_eq!(select_best_setting(&BTreeMap::new()), None);
    }
}
