mod common;

use std::f64::consts::PI;

use pipeclimb::output::trace_csv;
use pipeclimb::pipegeom::track_path_length;
use pipeclimb::sim::{run, step, Preset, PresetOptions, RunStatus, SimState};

use common::{preset_config, preset_config_with, CLIMB_LENGTH, NOMINAL_SPEED};

#[test]
fn vertical_climb_time() {
    let cfg = preset_config(Preset::VerticalClimb, 1.0, 0.0);
    let out = run(&cfg).unwrap();
    assert_eq!(out.status, RunStatus::Completed);
    let expected = CLIMB_LENGTH / NOMINAL_SPEED;
    assert!((out.final_state.t - expected).abs() <= cfg.dt);
    assert_eq!(out.final_state.s, CLIMB_LENGTH);
    assert_eq!(out.summary.unwrap().slip_events, 0);
}

#[test]
fn identical_configs_identical_traces() {
    let cfg = preset_config(Preset::FullCircuit, 1.0, PI / 3.0);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(trace_csv(&a.trace), trace_csv(&b.trace));
}

#[test]
fn trace_rows_and_monotone_position() {
    let cfg = preset_config(Preset::FullCircuit, 1.0, 0.0);
    let out = run(&cfg).unwrap();
    let rows = out.trace.len();
    assert_eq!(rows as f64, (out.final_state.t / cfg.dt).ceil());
    let recs = out.trace.records();
    assert!(recs.windows(2).all(|w| w[1].s >= w[0].s && w[1].t > w[0].t));
    let summary = out.summary.unwrap();
    let total: f64 = summary.segments.iter().map(|s| s.duration_s).sum();
    assert!((total - summary.total_time_s).abs() < 1e-9);
    for i in 0..3 {
        let rel = (summary.track_distance_mm[i] - out.final_state.odometers[i]).abs()
            / out.final_state.odometers[i];
        assert!(rel < 1e-3);
    }
}

#[test]
fn slip_shrinks_with_wall_stiffness() {
    let mut prev = f64::INFINITY;
    for c in [0.1, 1.0, 10.0] {
        let out = run(&preset_config(Preset::Elbow90, c, 0.0)).unwrap();
        let worst = out.summary.unwrap().max_abs_slip;
        assert!(worst < prev, "c_slip {c}: {worst} !< {prev}");
        prev = worst;
    }
}

#[test]
fn elbow_without_wall_reaction_keeps_speeds_equal() {
    let out = run(&preset_config(Preset::Elbow90, 0.0, 0.0)).unwrap();
    let rec = out.trace.records()[0];
    assert!((rec.speed[0] - rec.speed[1]).abs() < 1e-9);
    assert!(rec.slip.iter().any(|s| s.abs() > 0.1));
}

#[test]
fn odometers_average_to_centerline() {
    let cfg = preset_config(Preset::FullCircuit, 10.0, 0.0);
    let out = run(&cfg).unwrap();
    let mean = out.final_state.odometers.iter().sum::<f64>() / 3.0;
    let length = cfg.network.centerline_length();
    assert!((mean - length).abs() / length < 1e-3);
}

#[test]
fn input_power_non_negative() {
    for preset in Preset::ALL {
        let out = run(&preset_config(preset, 1.0, 0.0)).unwrap();
        assert!(out.trace.records().iter().all(|r| r.input_power >= 0.0));
    }
}

#[test]
fn body_speed_continuous_at_boundaries() {
    let cfg = preset_config(Preset::FullCircuit, 10.0, 0.0);
    let out = run(&cfg).unwrap();
    let recs = out.trace.records();
    for w in recs.windows(2) {
        let jump = (w[1].body_speed - w[0].body_speed).abs();
        if w[0].segment == w[1].segment {
            assert!(jump < 1e-9, "jump {jump} inside segment {}", w[0].segment);
        } else {
            assert!(jump < 1e-3 * NOMINAL_SPEED, "jump {jump} at boundary");
        }
    }
}

#[test]
fn split_u_piece_outer_track_runs_further() {
    let opts = PresetOptions {
        split_u_piece: true,
        ..PresetOptions::default()
    };
    let cfg = preset_config_with(Preset::UPiece, 10.0, 0.0, &opts);
    let out = run(&cfg).unwrap();
    assert_eq!(out.status, RunStatus::Completed);
    let spec = cfg.network.spec();
    let path = |roll: f64| -> f64 {
        cfg.network
            .segments()
            .iter()
            .map(|s| track_path_length(s, spec, roll))
            .sum()
    };
    let rolls = cfg.robot.module_rolls;
    let outer = path(rolls[0]);
    let inner = path(rolls[1]);
    let odo = out.final_state.odometers;
    let want = outer - inner;
    let got = odo[0] - odo[1];
    assert!(got > 0.0);
    assert!((odo[0] - outer).abs() / outer < 1e-3);
    assert!((odo[1] - inner).abs() / inner < 1e-3);
    assert!((got - want).abs() / want < 1e-3, "{got} vs {want}");
}

#[test]
fn step_refuses_past_end() {
    let cfg = preset_config(Preset::Horizontal, 1.0, 0.0);
    let mut state = SimState::initial();
    state.s = cfg.network.centerline_length();
    assert!(step(&state, &cfg).is_err());
}

#[test]
fn sweeps_run_in_parallel_with_isolated_state() {
    let cfgs: Vec<_> = [0.1, 1.0, 10.0]
        .iter()
        .map(|c| preset_config(Preset::Elbow90, *c, 0.0))
        .collect();
    let serial: Vec<_> = cfgs.iter().map(|c| run(c).unwrap().trace).collect();
    let parallel: Vec<_> = std::thread::scope(|s| {
        let hs: Vec<_> = cfgs.iter().map(|c| s.spawn(move || run(c).unwrap().trace)).collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(serial, parallel);
}
