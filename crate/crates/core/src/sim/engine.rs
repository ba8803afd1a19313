//! Discrete-event loop.
//!
//! Three event sources drive a run: the fixed sub-step grid (temperature and
//! noise are resampled, the chipping counter integrates), dwell boundaries of
//! the channel sweep, and beacon instants. At equal times they are handled in
//! that order.

use rand::Rng;

use crate::airlink::{attempt_reception, TickCounter};
use crate::calibration::{
    fast_calibrate, fine_calibrate, if_track, sweep_step, ChippingCalState, ChippingMode, RfTrackState, StepAction,
    SweepAction, SweepState,
};
use crate::clock::{ppm_error, FrequencyNoise, TunableOscillator};
use crate::environment::{temperature_at, ChamberJitter};
use crate::error::{Error, Result};
use crate::sim::config::ScenarioConfig;
use crate::sim::rng::RngStreams;
use crate::sim::summary::{summarize, RunSummary};
use crate::sim::trace::{events, quantize, TraceRecord, FREQ_DECIMALS, PPM_DECIMALS, TEMP_DECIMALS, TIME_DECIMALS};

/// A completed channel sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub start_s: f64,
    pub finish_s: f64,
    pub start_setting: u32,
    pub finish_setting: u32,
    /// `(setting, CRC-OK count)` per dwell, in sweep order.
    pub counts: Vec<(u32, u32)>,
    pub listen_duration_s: f64,
}

impl SweepRecord {
    pub fn dwells(&self) -> usize {
        self.counts.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineDecisionRecord {
    pub time_s: f64,
    pub mean_ppm: f64,
    pub action: StepAction,
}

/// Calibration activity that the trace only shows as event strings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationLog {
    pub sweeps: Vec<SweepRecord>,
    /// Chipping ticks counted over each interval between consecutive receptions.
    pub tick_counts: Vec<(f64, u64)>,
    pub fast_corrections: Vec<(f64, i64)>,
    pub fine_decisions: Vec<FineDecisionRecord>,
    pub if_steps: Vec<(f64, i8)>,
    pub lock_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub summary: RunSummary,
    pub log: CalibrationLog,
}

/// A run that stopped early. `trace` holds the rows produced before the error.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    #[source]
    pub error: Error,
    pub trace: Vec<TraceRecord>,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self {
            error,
            trace: Vec::new(),
        }
    }
}

enum Device {
    FreeRunning,
    Sweeping {
        state: SweepState,
        start_s: f64,
        dwell_idx: u64,
        count: u32,
    },
    Locked,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Next {
    SubStep,
    DwellEnd,
    Beacon,
}

struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    rng: RngStreams,
    rf: TunableOscillator,
    chip: TunableOscillator,
    rf_noise: FrequencyNoise,
    chip_noise: FrequencyNoise,
    jitter: ChamberJitter,
    temp_c: f64,
    rf_noise_ppm: f64,
    chip_noise_ppm: f64,
    counter: TickCounter,
    device: Device,
    chip_cal: ChippingCalState,
    track: RfTrackState,
    dwell_s: f64,
    last_ok_count: Option<i64>,
    last_rx_s: f64,
    rx_total: u64,
    lost_total: u64,
    trace: Vec<TraceRecord>,
    log: CalibrationLog,
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let cal = &cfg.calibrator;
        let mut chip_cal = ChippingCalState::new(
            cfg.chipping_oscillator.f_nominal_hz,
            cfg.beacon_source.period_s,
            cfg.chipping_oscillator.delta_f_hz,
            cal.window_len,
            cal.window_ppm,
        )?;
        chip_cal.sliding = cal.sliding_window;
        Ok(Self {
            cfg,
            rng: RngStreams::new(cfg.seed),
            rf: cfg.rf_oscillator.clone(),
            chip: cfg.chipping_oscillator.clone(),
            rf_noise: FrequencyNoise::for_oscillator(&cfg.rf_oscillator),
            chip_noise: FrequencyNoise::for_oscillator(&cfg.chipping_oscillator),
            jitter: ChamberJitter::new(&cfg.temperature),
            temp_c: 0.0,
            rf_noise_ppm: 0.0,
            chip_noise_ppm: 0.0,
            counter: TickCounter::new(0.0),
            device: Device::FreeRunning,
            chip_cal,
            track: RfTrackState::new(cal.deadband_hz, cfg.rf_oscillator.delta_f_hz)?,
            dwell_s: cal.listen_duration_s / (1.0 + cal.timekeeping_ppm * 1e-6),
            last_ok_count: None,
            last_rx_s: 0.0,
            rx_total: 0,
            lost_total: 0,
            trace: Vec::new(),
            log: CalibrationLog::default(),
        })
    }

    fn rf_freq(&self) -> Result<f64> {
        self.rf.synthesize(self.temp_c, self.rf_noise_ppm)
    }

    fn chip_freq(&self) -> Result<f64> {
        self.chip.synthesize(self.temp_c, self.chip_noise_ppm)
    }

    fn sample_environment(&mut self, t: f64, dt: f64) -> Result<()> {
        let jitter = self.jitter.sample(&mut self.rng.jitter, dt);
        self.temp_c = temperature_at(&self.cfg.temperature, t, jitter)?;
        self.rf_noise_ppm = self.rf_noise.sample(&mut self.rng.noise_rf, dt);
        self.chip_noise_ppm = self.chip_noise.sample(&mut self.rng.noise_chip, dt);
        Ok(())
    }

    fn snapshot(&self, t: f64) -> Result<TraceRecord> {
        let rf_freq_hz = quantize(self.rf_freq()?, FREQ_DECIMALS);
        let chip_freq_hz = quantize(self.chip_freq()?, FREQ_DECIMALS);
        Ok(TraceRecord {
            time_s: quantize(t, TIME_DECIMALS),
            temp_c: quantize(self.temp_c, TEMP_DECIMALS),
            rf_setting: self.rf.setting,
            rf_freq_hz,
            rf_ppm: quantize(ppm_error(rf_freq_hz, self.rf.f_nominal_hz)?.value(), PPM_DECIMALS),
            chip_setting: self.chip.setting,
            chip_freq_hz,
            chip_ppm: quantize(ppm_error(chip_freq_hz, self.chip.f_nominal_hz)?.value(), PPM_DECIMALS),
            beacons_rx_total: self.rx_total,
            beacons_lost_total: self.lost_total,
            event: String::new(),
        })
    }

    /// Starts a row for instant `t`, folding it into the previous row when
    /// both land on the same printed timestamp.
    fn open_row(&mut self, t: f64) -> Result<()> {
        let mut row = self.snapshot(t)?;
        if let Some(prev) = self.trace.pop_if(|prev| prev.time_s == row.time_s) {
            row.event = prev.event;
        }
        self.trace.push(row);
        Ok(())
    }

    fn push_event(&mut self, event: &str) {
        self.trace
            .last_mut()
            .expect("row opened before events")
            .push_event(event);
    }

    fn start_sweep(&mut self, t: f64) {
        let start = self.cfg.rf_oscillator.setting;
        self.rf.setting = start;
        let mut state = SweepState::new(start, self.rf.max_setting, self.cfg.calibrator.listen_duration_s);
        state.silence_threshold_hz = self.cfg.calibrator.silence_span_hz;
        self.device = Device::Sweeping {
            state,
            start_s: t,
            dwell_idx: 0,
            count: 0,
        };
        self.last_ok_count = None;
    }

    fn dwell_end(&self) -> f64 {
        match &self.device {
            Device::Sweeping { start_s, dwell_idx, .. } => start_s + (*dwell_idx + 1) as f64 * self.dwell_s,
            _ => f64::INFINITY,
        }
    }

    fn on_dwell_end(&mut self, t: f64) -> Result<()> {
        let Device::Sweeping {
            state,
            start_s,
            dwell_idx,
            count,
        } = &mut self.device
        else {
            return Ok(());
        };
        let finished = match sweep_step(state, *count, self.rf.delta_f_hz)? {
            SweepAction::Advance => {
                *dwell_idx += 1;
                *count = 0;
                None
            }
            SweepAction::Finish(best) => Some(SweepRecord {
                start_s: *start_s,
                finish_s: t,
                start_setting: self.cfg.rf_oscillator.setting,
                finish_setting: best,
                counts: state.per_setting_count.iter().map(|(&s, &c)| (s, c)).collect(),
                listen_duration_s: state.listen_duration_s,
            }),
        };
        let Some(record) = finished else {
            self.rf.step(1);
            return Ok(());
        };
        let best = record.finish_setting;
        self.log.sweeps.push(record);
        self.open_row(t)?;
        self.rf.setting = best;
        self.push_event(&format!("{}({best})", events::SWEEP_FINISH));
        self.device = Device::Locked;
        self.last_ok_count = None;
        self.last_rx_s = t;
        Ok(())
    }

    fn on_beacon(&mut self, t: f64) -> Result<()> {
        let cfg = self.cfg;
        let loss_sample: f64 = self.rng.loss.random();
        let mut report = attempt_reception(self.rf_freq()?, &cfg.beacon_source, &cfg.receiver, t, loss_sample);
        if report.crc_ok {
            self.rx_total += 1;
        } else {
            self.lost_total += 1;
        }
        self.open_row(t)?;

        match &mut self.device {
            Device::FreeRunning => return Ok(()),
            Device::Sweeping { count, .. } => {
                if report.crc_ok {
                    *count += 1;
                }
                return Ok(());
            }
            Device::Locked => {}
        }

        if !report.crc_ok {
            self.last_ok_count = None;
            if t - self.last_rx_s >= cfg.calibrator.lock_timeout_s {
                self.log.lock_losses.push(t);
                self.push_event(events::LOCK_LOST);
                self.start_sweep(t);
                self.push_event(events::SWEEP_START);
            }
            return Ok(());
        }

        let now = self.counter.count();
        report.ticks_since_last_rx = self.last_ok_count.map(|prev| (now - prev).max(0) as u64);
        self.last_ok_count = Some(now);
        self.last_rx_s = t;
        if cfg.calibrator.if_tracking {
            if let StepAction::Step(d) = if_track(&report, &self.track)? {
                self.rf.step(d as i64);
                self.log.if_steps.push((t, d));
                self.push_event(&format!("{}({d:+})", events::IF_STEP));
            }
        }
        if let Some(ticks) = report.ticks_since_last_rx {
            self.log.tick_counts.push((t, ticks));
            self.calibrate_chipping(t, ticks)?;
        }
        Ok(())
    }

    fn calibrate_chipping(&mut self, t: f64, ticks: u64) -> Result<()> {
        let cal = &self.cfg.calibrator;
        if self.chip_cal.mode == ChippingMode::Uncalibrated && cal.fast_calibration {
            let correction = fast_calibrate(ticks, &mut self.chip_cal)?;
            self.chip.step(correction);
            self.log.fast_corrections.push((t, correction));
            self.push_event(&format!("{}({correction})", events::FAST_CAL));
            return Ok(());
        }
        if !cal.fine_calibration {
            return Ok(());
        }
        self.chip_cal.record(ticks);
        if !self.chip_cal.window_full() {
            return Ok(());
        }
        let decision = fine_calibrate(&mut self.chip_cal)?;
        self.log.fine_decisions.push(FineDecisionRecord {
            time_s: t,
            mean_ppm: decision.mean_ppm,
            action: decision.action,
        });
        if let StepAction::Step(d) = decision.action {
            self.chip.step(d as i64);
            self.push_event(&format!("{}({d:+})", events::FINE_STEP));
        }
        Ok(())
    }

    fn run(mut self) -> std::result::Result<RunOutput, RunFailure> {
        match self.run_loop() {
            Ok(()) => {}
            Err(error) => {
                return Err(RunFailure {
                    error,
                    trace: std::mem::take(&mut self.trace),
                })
            }
        }
        let summary = summarize(&self.trace, events::SWEEP_FINISH, self.cfg.calibrator.window_ppm)?;
        Ok(RunOutput {
            trace: self.trace,
            summary,
            log: self.log,
        })
    }

    fn run_loop(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let dt = cfg.sub_step_s;
        self.sample_environment(0.0, dt)?;
        self.open_row(0.0)?;
        if cfg.calibrator.enabled {
            self.start_sweep(0.0);
            self.push_event(events::SWEEP_START);
        }

        let mut substep_idx: u64 = 1;
        let mut beacon_idx: u64 = 0;
        loop {
            let t_sub = substep_idx as f64 * dt;
            let t_dwell = self.dwell_end();
            let t_beacon = cfg.beacon_source.beacon_time(beacon_idx);
            let (t, next) = [
                (t_sub, Next::SubStep),
                (t_dwell, Next::DwellEnd),
                (t_beacon, Next::Beacon),
            ]
            .into_iter()
            .fold((f64::INFINITY, Next::SubStep), |best, cand| {
                if cand.0 < best.0 {
                    cand
                } else {
                    best
                }
            });
            if t >= cfg.duration_s {
                break;
            }
            let chip_freq = self.chip_freq()?;
            self.counter.advance(t, chip_freq);
            match next {
                Next::SubStep => {
                    self.sample_environment(t, dt)?;
                    substep_idx += 1;
                }
                Next::DwellEnd => self.on_dwell_end(t)?,
                Next::Beacon => {
                    self.on_beacon(t)?;
                    beacon_idx += 1;
                }
            }
        }
        Ok(())
    }
}

/// Runs one scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> std::result::Result<RunOutput, RunFailure> {
    Simulation::new(cfg)?.run()
}
