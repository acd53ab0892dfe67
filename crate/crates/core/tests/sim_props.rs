use proptest::prelude::*;
use prtspace::sim::{
    controller_decide, is_monotone, physics_step, read_trace, run_scenario, target_speed, worst_case_sweep,
    write_trace, Mode, ScenarioConfig, SimState,
};

fn config() -> impl Strategy<Value = ScenarioConfig> {
    (300u64..700, 1.0f64..119.0, 1.0f64..29.0, 5.0f64..12.0, 0u64..2, any::<bool>()).prop_map(
        |(delay_ms, hx, hy, speed, phase, human)| ScenarioConfig {
            reaction_delay: delay_ms * 1000,
            human_start: human.then_some((hx, hy)),
            human_speed: speed,
            poll_phase: phase * 5000,
            time_cap: 20_000_000,
            ..ScenarioConfig::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn runs_are_deterministic(cfg in config()) {
        prop_assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    }

    #[test]
    fn speed_is_clamped_and_never_overshoots(cfg in config()) {
        let (trace, _) = run_scenario(&cfg).unwrap();
        for w in trace.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            prop_assert!(b.robot_speed.abs() <= cfg.robot_max_speed);
            let pos = a.robot_box.center().0 - cfg.track_start_x;
            let target = target_speed(b.mode, pos, &cfg);
            let (lo, hi) = if a.robot_speed <= target { (a.robot_speed, target) } else { (target, a.robot_speed) };
            // Arrival at the end of the track zeroes the speed.
            prop_assert!(b.robot_speed == 0.0 || (lo - 1e-12 <= b.robot_speed && b.robot_speed <= hi + 1e-12));
        }
    }

    #[test]
    fn trace_is_on_the_five_millisecond_grid(cfg in config()) {
        let (trace, _) = run_scenario(&cfg).unwrap();
        prop_assert_eq!(trace[0].timestamp, 0);
        for w in trace.windows(2) {
            prop_assert_eq!(w[1].timestamp - w[0].timestamp, 5000);
        }
    }

    #[test]
    fn modes_apply_one_reaction_delay_after_the_poll(cfg in config()) {
        let (trace, report) = run_scenario(&cfg).unwrap();
        for &(t, mode) in &report.mode_changes {
            // The latest poll whose decision is due by `t`; it must be due
            // within the last physics step.
            let due = t - cfg.reaction_delay;
            let decided_at = due - (due - cfg.poll_phase) % cfg.poll_period;
            prop_assert!(decided_at + cfg.reaction_delay + cfg.physics_step > t);
            let rec = trace.iter().find(|r| r.timestamp == decided_at).unwrap();
            let (rx, ry) = rec.robot_box.center();
            let (hx, hy) = rec.human_box.unwrap().center();
            prop_assert_eq!(controller_decide((hx - rx).hypot(hy - ry), &cfg), mode);
        }
    }

    #[test]
    fn impact_speed_grows_with_delay(mut delays in proptest::collection::vec(300u64..650, 2..6)) {
        delays.sort();
        let delays: Vec<u64> = delays.into_iter().map(|d| d * 1000).collect();
        let reports = worst_case_sweep(&ScenarioConfig::default(), &delays).unwrap();
        prop_assert!(is_monotone(&reports));
    }

    #[test]
    fn traces_round_trip_through_csv(cfg in config()) {
        let (trace, _) = run_scenario(&cfg).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        prop_assert_eq!(read_trace(buf.as_slice()).unwrap(), trace);
    }
}

#[test]
fn red_stop_from_full_speed_takes_about_a_third_of_ten_meters() {
    let cfg = ScenarioConfig { human_start: None, ..ScenarioConfig::default() };
    let mut s = SimState { mode: Mode::Red, robot_pos: 10.0, robot_speed: 10.0, ..SimState::initial(&cfg) };
    let start = s.robot_pos;
    while s.robot_speed > 0.0 {
        s = physics_step(&s, &cfg);
    }
    let d = s.robot_pos - start;
    assert!((d - 10.0 / 3.0).abs() <= 0.05, "{d}");
}
