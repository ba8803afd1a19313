use proptest::prelude::*;
use xtalfree::airlink::beacon_times;
use xtalfree::clock::{ppm_error, CHANNEL_11_HZ};
use xtalfree::environment::TemperatureProfile;
use xtalfree::sim::trace::events;
use xtalfree::sim::{presets, read_trace, run_scenario, summarize, trace_to_string, RunOutput, ScenarioConfig};
use xtalfree::Error;

fn run(cfg: &ScenarioConfig) -> RunOutput {
    run_scenario(cfg).expect("run succeeds")
}

fn quiet(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.rf_oscillator.noise_sigma_ppm = 0.0;
    cfg.chipping_oscillator.noise_sigma_ppm = 0.0;
    cfg.temperature.stability_c = 0.0;
    cfg.temperature.set_error_fraction = 0.0;
    cfg
}

fn check_invariants(cfg: &ScenarioConfig, out: &RunOutput) {
    let trace = &out.trace;
    assert!(
        trace.windows(2).all(|w| w[0].time_s < w[1].time_s),
        "time must increase"
    );
    let beacons = beacon_times(&cfg.beacon_source, cfg.duration_s);
    for r in trace {
        let heard = beacons.iter().filter(|&&t| t <= r.time_s + 5e-7).count() as u64;
        assert_eq!(
            r.beacons_rx_total + r.beacons_lost_total,
            heard,
            "conservation at {}",
            r.time_s
        );
        let rf = ppm_error(r.rf_freq_hz, cfg.rf_oscillator.f_nominal_hz).unwrap().value();
        let chip = ppm_error(r.chip_freq_hz, cfg.chipping_oscillator.f_nominal_hz)
            .unwrap()
            .value();
        assert!((rf - r.rf_ppm).abs() <= 5.1e-4, "rf ppm {} vs {}", r.rf_ppm, rf);
        assert!(
            (chip - r.chip_ppm).abs() <= 5.1e-4,
            "chip ppm {} vs {}",
            r.chip_ppm,
            chip
        );
        assert!(r.rf_setting <= cfg.rf_oscillator.max_setting);
        assert!(r.chip_setting <= cfg.chipping_oscillator.max_setting);
    }
    let last = trace.last().unwrap();
    assert_eq!(last.beacons_rx_total + last.beacons_lost_total, beacons.len() as u64);
}

#[test]
fn lab_startup_invariants() {
    let cfg = presets::lab_startup();
    let out = run(&cfg);
    check_invariants(&cfg, &out);
    assert_eq!(out.log.sweeps.len(), 1);
    assert_eq!(out.log.fast_corrections.len(), 1);
}

#[test]
fn ramp_invariants() {
    let cfg = presets::temperature_ramp();
    check_invariants(&cfg, &run(&cfg));
}

#[test]
fn csv_reproduces_trace_and_summary() {
    let cfg = presets::temperature_ramp();
    let out = run(&cfg);
    let text = trace_to_string(&out.trace).unwrap();
    let back = read_trace(text.as_bytes()).unwrap();
    assert_eq!(back, out.trace);
    let again = summarize(&back, events::SWEEP_FINISH, cfg.calibrator.window_ppm).unwrap();
    assert_eq!(again, out.summary);
}

#[test]
fn lock_time_matches_dwells() {
    let cfg = presets::lab_startup();
    let out = run(&cfg);
    let sweep = &out.log.sweeps[0];
    let expected = sweep.dwells() as f64 * cfg.calibrator.listen_duration_s;
    assert!((out.summary.time_to_lock_s.unwrap() - expected).abs() < 1e-6);
    let finish = out.trace.iter().find(|r| r.has_event(events::SWEEP_FINISH)).unwrap();
    assert_eq!(
        finish.event_arg(events::SWEEP_FINISH),
        Some(sweep.finish_setting.to_string().as_str())
    );
}

#[test]
fn zero_noise_on_channel_is_a_fixed_point() {
    let mut cfg = quiet(ScenarioConfig::default());
    cfg.beacon_source.tx_ppm_error = 0.0;
    cfg.chipping_oscillator = presets::chipping_starting_at(0.0);
    cfg.chipping_oscillator.noise_sigma_ppm = 0.0;
    // grid centred on the channel, sweep starts eight steps below it
    cfg.rf_oscillator = presets::rf_on_grid(CHANNEL_11_HZ);
    cfg.rf_oscillator.noise_sigma_ppm = 0.0;
    let centre = cfg.rf_oscillator.setting;
    cfg.rf_oscillator.setting = centre - 8;
    cfg.duration_s = 120.0;
    let out = run(&cfg);
    assert_eq!(out.log.sweeps[0].finish_setting, centre);
    let lock = out
        .trace
        .iter()
        .position(|r| r.has_event(events::SWEEP_FINISH))
        .unwrap();
    for r in &out.trace[lock + 1..] {
        assert_eq!(r.rf_ppm, 0.0);
        assert_eq!(r.chip_ppm, 0.0);
        assert!(!r.has_event(events::IF_STEP) && !r.has_event(events::FINE_STEP));
        if r.has_event(events::FAST_CAL) {
            assert_eq!(r.event_arg(events::FAST_CAL), Some("0"));
        }
    }
    assert!(out.log.tick_counts.iter().all(|&(_, n)| n == 250_000));
    assert!(out.log.fine_decisions.iter().all(|d| d.mean_ppm == 0.0));
}

#[test]
fn halving_the_sub_step_moves_tick_counts_by_at_most_one() {
    // with the fine loop on, a one-tick difference at a threshold changes a
    // setting and the runs part ways
    let mut coarse = quiet(presets::temperature_ramp());
    coarse.calibrator.fine_calibration = false;
    let mut fine = coarse.clone();
    fine.sub_step_s /= 2.0;
    let a = run(&coarse).log.tick_counts;
    let b = run(&fine).log.tick_counts;
    assert!(a.len() > 1000);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.0, y.0);
        assert!(x.1.abs_diff(y.1) <= 1, "{x:?} vs {y:?}");
    }
}

#[test]
fn tracking_error_stays_inside_the_limit_cycle_bound() {
    let cfg = quiet(presets::temperature_ramp());
    let out = run(&cfg);
    let carrier = cfg.beacon_source.carrier_hz();
    let step_ppm = cfg.rf_oscillator.delta_f_hz / carrier * 1e6;
    let deadband_ppm = cfg.calibrator.deadband_hz / carrier * 1e6;
    let drift_ppm_per_s = 48.64 * 2.0 / 60.0;
    let bound = step_ppm / 2.0 + deadband_ppm + drift_ppm_per_s * cfg.beacon_source.period_s;
    let settle = out.summary.time_to_lock_s.unwrap() + 1.0;
    for r in out.trace.iter().filter(|r| r.time_s > settle) {
        let err = ppm_error(r.rf_freq_hz, carrier).unwrap().value();
        assert!(
            err.abs() <= bound + 1e-3,
            "{} ppm at {} s exceeds {bound}",
            err,
            r.time_s
        );
    }
}

#[test]
fn fine_loop_alone_pulls_the_chipping_clock_into_the_window() {
    let mut cfg = quiet(presets::lab_startup());
    cfg.calibrator.fast_calibration = false;
    let out = run(&cfg);
    let step_ppm = cfg.chipping_oscillator.delta_f_hz / cfg.chipping_oscillator.f_nominal_hz * 1e6;
    let last = out.trace.last().unwrap();
    assert!(last.chip_ppm.abs() <= cfg.calibrator.window_ppm + step_ppm);
    assert!(out.log.fast_corrections.is_empty());
    // 20 steps of one setting each
    assert!(out.trace.iter().filter(|r| r.has_event(events::FINE_STEP)).count() >= 19);
}

#[test]
fn long_outage_triggers_a_new_sweep() {
    let mut cfg = presets::lab_startup();
    cfg.receiver.loss_bursts = vec![(100.0, 110.0)];
    let out = run(&cfg);
    assert_eq!(out.log.lock_losses.len(), 1);
    let lost_at = out.log.lock_losses[0];
    assert!(lost_at >= 100.0 + cfg.calibrator.lock_timeout_s - 0.2 && lost_at < 110.0);
    assert_eq!(out.log.sweeps.len(), 2);
    let row = out.trace.iter().find(|r| r.has_event(events::LOCK_LOST)).unwrap();
    assert!(row.has_event(events::SWEEP_START));
    check_invariants(&cfg, &out);
}

#[test]
fn short_outage_keeps_lock() {
    let cfg = presets::temperature_ramp();
    let out = run(&cfg);
    assert!(out.log.lock_losses.is_empty());
    assert_eq!(out.log.sweeps.len(), 1);
}

#[test]
fn unreachable_channel_reports_sweep_failure_with_partial_trace() {
    let mut cfg = presets::lab_startup();
    // whole grid above the channel
    let rf = &mut cfg.rf_oscillator;
    rf.f_at_min_setting_hz = CHANNEL_11_HZ * (1.0 + 2000e-6);
    rf.max_setting = (CHANNEL_11_HZ * 8500e-6 / rf.delta_f_hz).ceil() as u32;
    let failure = run_scenario(&cfg).unwrap_err();
    assert!(matches!(failure.error, Error::SweepFailure { .. }));
    assert!(!failure.trace.is_empty());
    assert!(failure.trace.iter().all(|r| r.beacons_rx_total == 0));
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let mut cfg = presets::lab_startup();
    cfg.sub_step_s = cfg.beacon_source.period_s / 5.0;
    assert!(matches!(run_scenario(&cfg).unwrap_err().error, Error::Config(_)));
}

#[test]
fn loss_draws_do_not_disturb_noise_draws() {
    let mut a = presets::stability();
    a.duration_s = 60.0;
    let mut b = a.clone();
    b.receiver.loss_prob = 0.5;
    let (ta, tb) = (run(&a).trace, run(&b).trace);
    assert_eq!(ta.len(), tb.len());
    for (x, y) in ta.iter().zip(&tb) {
        assert_eq!(
            (x.rf_freq_hz, x.chip_freq_hz, x.temp_c),
            (y.rf_freq_hz, y.chip_freq_hz, y.temp_c)
        );
    }
    assert!(tb.last().unwrap().beacons_lost_total > 0);
}

#[test]
fn heavier_loss_slows_fine_calibration() {
    let decisions = |loss: f64| {
        let mut cfg = presets::lab_startup();
        cfg.receiver.loss_prob = loss;
        run(&cfg).log.fine_decisions.len()
    };
    let (none, some, heavy) = (decisions(0.0), decisions(0.2), decisions(0.5));
    assert!(none > some && some > heavy, "{none} {some} {heavy}");
}

#[test]
fn sliding_window_decides_every_reception() {
    let mut cfg = presets::lab_startup();
    cfg.calibrator.sliding_window = true;
    let out = run(&cfg);
    let batch = run(&presets::lab_startup()).log.fine_decisions.len();
    assert!(out.log.fine_decisions.len() > 5 * batch);
}

#[test]
fn piecewise_profile_is_followed() {
    let mut cfg = quiet(presets::temperature_ramp());
    cfg.temperature = TemperatureProfile::piecewise(vec![(0.0, 25.0), (100.0, 35.0)]);
    cfg.duration_s = 150.0;
    let out = run(&cfg);
    let at = |t: f64| out.trace.iter().find(|r| r.time_s >= t).unwrap().temp_c;
    assert!((at(50.0) - 30.0).abs() < 0.01);
    assert!((at(120.0) - 35.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_scenarios_keep_invariants(
        seed in any::<u64>(),
        loss in 0.0f64..0.4,
        start_ppm in -3000.0f64..-200.0,
        chip_ppm in -9000.0f64..9000.0,
        phase in 0.0f64..0.125,
    ) {
        let mut cfg = presets::lab_startup();
        cfg.seed = seed;
        cfg.duration_s = 120.0;
        cfg.receiver.loss_prob = loss;
        cfg.rf_oscillator = presets::rf_starting_at(CHANNEL_11_HZ, start_ppm);
        cfg.chipping_oscillator = presets::chipping_starting_at(chip_ppm);
        cfg.beacon_source.phase_offset_s = phase;
        match run_scenario(&cfg) {
            Ok(out) => {
                check_invariants(&cfg, &out);
                let again = run(&cfg);
                prop_assert_eq!(again.trace, out.trace);
            }
            Err(f) => {
                let is_sweep_failure = matches!(f.error, Error::SweepFailure { .. });
                prop_assert!(is_sweep_failure, "unexpected error {}", f.error);
            }
        }
    }
}
