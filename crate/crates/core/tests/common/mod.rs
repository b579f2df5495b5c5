#![allow(dead_code)]

use std::f64::consts::PI;

use pipeclimb::pipegeom::{PipeSpec, Segment};
use pipeclimb::sim::{preset_network, Preset, PresetOptions, SimConfig, SpeedCommand};
use pipeclimb::ThreeOutputDifferential;

/// Straight-line body speed, mm/s.
pub const NOMINAL_SPEED: f64 = 33.62;
/// Vertical climb length, mm.
pub const CLIMB_LENGTH: f64 = 350.0;

/// Closed-form solve for affine load curves `τ = τ0 + c·ω` (all `c > 0`),
/// independent of the bisection path: enumerate active sets in order of
/// Coulomb threshold and take the one whose root is consistent.
pub fn affine_oracle(curves: &[(f64, f64); 3], target: f64) -> ([f64; 3], f64) {
    let mut order = [0usize, 1, 2];
    order.sort_by(|a, b| curves[*a].0.total_cmp(&curves[*b].0));
    for m in 1..=3 {
        let active = &order[..m];
        let inv: f64 = active.iter().map(|&i| 1.0 / curves[i].1).sum();
        let off: f64 = active.iter().map(|&i| curves[i].0 / curves[i].1).sum();
        let tau = (target + off) / inv;
        let lo_ok = tau >= curves[order[m - 1]].0;
        let hi_ok = m == 3 || tau <= curves[order[m]].0;
        if lo_ok && hi_ok {
            let speeds = [0, 1, 2].map(|i| ((tau - curves[i].0) / curves[i].1).max(0.0));
            return (speeds, tau);
        }
    }
    unreachable!("some active set is always consistent")
}

/// Arc length of the contact line on the torus by summing chords of the
/// 3-D curve; the line sits at angle `β = roll − ψ` around the tube.
pub fn chord_arc_length(bend_radius: f64, pipe_radius: f64, bend_angle: f64, beta: f64, n: usize) -> f64 {
    let point = |u: f64| {
        let rho = bend_radius + pipe_radius * beta.cos();
        [rho * u.cos(), rho * u.sin(), pipe_radius * beta.sin()]
    };
    let mut prev = point(0.0);
    let mut total = 0.0;
    for k in 1..=n {
        let p = point(bend_angle * k as f64 / n as f64);
        total += ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2) + (p[2] - prev[2]).powi(2)).sqrt();
        prev = p;
    }
    total
}

/// Chord sums underestimate by ~(h²/24)·L; one Richardson step removes it.
pub fn arc_length_oracle(bend_radius: f64, pipe_radius: f64, bend_angle: f64, beta: f64) -> f64 {
    let coarse = chord_arc_length(bend_radius, pipe_radius, bend_angle, beta, 2048);
    let fine = chord_arc_length(bend_radius, pipe_radius, bend_angle, beta, 4096);
    (4.0 * fine - coarse) / 3.0
}

pub fn spec() -> PipeSpec {
    PipeSpec::new(20.0).unwrap()
}

pub fn preset_config(preset: Preset, slip_stiffness: f64, roll: f64) -> SimConfig {
    preset_config_with(preset, slip_stiffness, roll, &PresetOptions::default())
}

pub fn preset_config_with(preset: Preset, slip_stiffness: f64, roll: f64, opts: &PresetOptions) -> SimConfig {
    let (net, _) = preset_network(preset, spec(), opts).unwrap();
    let mut cfg = SimConfig::new(
        ThreeOutputDifferential::compose(1.0, 1.0).unwrap(),
        net,
        SpeedCommand::TargetSpeed(NOMINAL_SPEED),
    );
    cfg.robot.slip_stiffness = slip_stiffness;
    cfg.robot_roll = roll;
    cfg
}

pub fn elbow(bend_radius: f64, bend_angle: f64, plane_roll: f64) -> Segment {
    Segment::elbow(&spec(), bend_radius, bend_angle, plane_roll, 0.0).unwrap()
}

pub fn module_rolls() -> [f64; 3] {
    [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0]
}
