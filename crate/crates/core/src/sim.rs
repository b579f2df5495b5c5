//! Fixed-step quasi-static traversal.
//!
//! Every step is an equilibrium: the current segment fixes the normal forces
//! and load curves, the differential splits the input among the tracks, and
//! the body advances at the geometry-corrected mean track speed.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geartrain::{GearError, SpeedSolution, ThreeOutputDifferential};
use crate::kinematics::{
    gravity_share, normal_forces, path_factors, required_track_speeds, slip_ratio,
    tangential_force, track_load_curve, traction_limit, ContactState, KinematicsError,
    RobotConfig,
};
use crate::metrics::{summarize, MetricError};
use crate::pipegeom::{long_radius_elbow, GeometryError, PipeNetwork, PipeSpec, Segment};

pub use crate::metrics::SimSummary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("robot already at the end of the network")]
    Finished,
    #[error(transparent)]
    Gear(#[from] GearError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// How the input shaft is driven.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedCommand {
    /// Input shaft speed, rad/s.
    InputSpeed(f64),
    /// Straight-line body speed, mm/s.
    TargetSpeed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// s
    pub dt: f64,
    pub command: SpeedCommand,
    pub robot: RobotConfig,
    pub diff: ThreeOutputDifferential,
    pub network: PipeNetwork,
    /// Roll of the whole robot about the pipe axis, rad.
    pub robot_roll: f64,
    /// s
    pub max_time: f64,
}

impl SimConfig {
    pub fn new(diff: ThreeOutputDifferential, network: PipeNetwork, command: SpeedCommand) -> Self {
        Self {
            dt: 0.001,
            command,
            robot: RobotConfig::default(),
            diff,
            network,
            robot_roll: 0.0,
            max_time: 600.0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |name, value: f64, reason| SimError::InvalidParameter { name, value, reason };
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(bad("dt", self.dt, "time step must be > 0"));
        }
        if !(self.max_time.is_finite() && self.max_time > 0.0) {
            return Err(bad("max_time", self.max_time, "must be > 0"));
        }
        if !self.robot_roll.is_finite() {
            return Err(bad("robot_roll", self.robot_roll, "must be finite"));
        }
        match self.command {
            SpeedCommand::InputSpeed(w) if !w.is_finite() => {
                return Err(bad("input_speed", w, "must be finite"))
            }
            SpeedCommand::TargetSpeed(v) if !v.is_finite() => {
                return Err(bad("target_speed", v, "must be finite"))
            }
            _ => {}
        }
        self.robot.validate()?;
        Ok(())
    }

    /// Input shaft speed in rad/s. A target body speed maps through the mean
    /// constraint: mean track speed = k·ω_in·r_s.
    pub fn input_speed(&self) -> f64 {
        match self.command {
            SpeedCommand::InputSpeed(w) => w,
            SpeedCommand::TargetSpeed(v) => {
                v / (self.diff.input_ratio() * self.robot.sprocket_radius)
            }
        }
    }

    /// Mean track speed the input imposes, mm/s.
    pub fn nominal_track_speed(&self) -> f64 {
        self.diff.input_ratio() * self.input_speed() * self.robot.sprocket_radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// s
    pub t: f64,
    /// Centerline coordinate, mm.
    pub s: f64,
    /// Per-track odometers, mm.
    pub odometers: [f64; 3],
    pub steps: u64,
    pub last_solution: Option<SpeedSolution>,
    pub contact: Option<ContactState>,
}

impl SimState {
    pub fn initial() -> Self {
        Self {
            t: 0.0,
            s: 0.0,
            odometers: [0.0; 3],
            steps: 0,
            last_solution: None,
            contact: None,
        }
    }
}

/// One step's sample, taken at the start of the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub s: f64,
    pub segment: usize,
    /// Track speeds, mm/s.
    pub speed: [f64; 3],
    /// No-slip requirement at the current body speed, mm/s.
    pub required: [f64; 3],
    pub slip: [f64; 3],
    /// N
    pub normal_force: [f64; 3],
    /// Tangential force demand above μN.
    pub traction_exceeded: [bool; 3],
    /// Body speed along the centerline, mm/s.
    pub body_speed: f64,
    /// N·mm/s
    pub input_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    records: Vec<TraceRecord>,
    end_time: f64,
    end_position: f64,
}

impl SimTrace {
    pub fn new(records: Vec<TraceRecord>, end_time: f64, end_position: f64) -> Self {
        Self {
            records,
            end_time,
            end_position,
        }
    }

    /// Trace whose end is its last sample.
    pub fn from_records(records: Vec<TraceRecord>) -> Self {
        let (t, s) = records.last().map_or((0.0, 0.0), |r| (r.t, r.s));
        Self::new(records, t, s)
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn end_position(&self) -> f64 {
        self.end_position
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Advances the robot by one step of at most `cfg.dt`. The final step is
/// shortened so the robot stops exactly at the network end.
pub fn step(state: &SimState, cfg: &SimConfig) -> Result<(SimState, TraceRecord), SimError> {
    let net = &cfg.network;
    let length = net.centerline_length();
    if state.s >= length {
        return Err(SimError::Finished);
    }
    let (segment, _) = net.segment_at(state.s)?;
    let seg = &net.segments()[segment];
    let spec = net.spec();
    let robot = &cfg.robot;

    let factors = path_factors(seg, spec, robot, cfg.robot_roll);
    let compression = robot.compressions(seg);
    let normal = normal_forces(robot, compression)?;
    let weight = gravity_share(robot, seg);
    let input_speed = cfg.input_speed();
    let nominal = cfg.nominal_track_speed().abs();

    let mut loads = [crate::geartrain::LoadCurve::locked(); 3];
    for i in 0..3 {
        loads[i] = track_load_curve(normal[i], weight, nominal * factors[i], robot)?;
    }
    let solution = cfg.diff.solve_loaded_speeds(input_speed, &loads)?;
    let speed = solution.output_speeds.map(|w| w * robot.sprocket_radius);
    let body_speed = (0..3).map(|i| speed[i] / factors[i]).sum::<f64>() / 3.0;
    let required = required_track_speeds(body_speed, seg, spec, robot, cfg.robot_roll);

    let mut slip = [0.0; 3];
    let mut traction_exceeded = [false; 3];
    for i in 0..3 {
        slip[i] = slip_ratio(speed[i], required[i])?;
        let demand = tangential_force(normal[i], weight, solution.output_speeds[i], slip[i], robot);
        traction_exceeded[i] = demand.abs() > traction_limit(normal[i], robot.friction_coefficient);
    }

    let remaining = length - state.s;
    let (dt, s_next, full) = if body_speed > 0.0 && body_speed * cfg.dt >= remaining {
        (remaining / body_speed, length, false)
    } else {
        (cfg.dt, (state.s + body_speed * cfg.dt).clamp(state.s, length), true)
    };
    let t_next = if full {
        (state.steps + 1) as f64 * cfg.dt
    } else {
        state.t + dt
    };
    let mut odometers = state.odometers;
    for i in 0..3 {
        odometers[i] += speed[i].abs() * dt;
    }

    let record = TraceRecord {
        t: state.t,
        s: state.s,
        segment,
        speed,
        required,
        slip,
        normal_force: normal,
        traction_exceeded,
        body_speed,
        input_power: solution.input_torque * solution.input_speed,
    };
    let next = SimState {
        t: t_next,
        s: s_next,
        odometers,
        steps: state.steps + 1,
        last_solution: Some(solution),
        contact: Some(ContactState {
            compression,
            normal_force: normal,
            required_speed: required,
            actual_speed: speed,
            slip,
        }),
    };
    Ok((next, record))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    TimedOut,
    SolverFailed(SimError),
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::TimedOut => "timeout",
            RunStatus::SolverFailed(_) => "solver_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: SimTrace,
    /// `None` only when the first step already failed.
    pub summary: Option<SimSummary>,
    pub status: RunStatus,
    /// Last successfully reached state.
    pub final_state: SimState,
}

/// Steps until the network end or `max_time`. Identical configurations give
/// bit-identical traces.
pub fn run(cfg: &SimConfig) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let length = cfg.network.centerline_length();
    let mut state = SimState::initial();
    let mut records = Vec::with_capacity((cfg.max_time / cfg.dt).min(1e7) as usize / 4);
    log::debug!(
        "run: {} segments, {:.3} mm, input {:.6} rad/s",
        cfg.network.segments().len(),
        length,
        cfg.input_speed()
    );
    let status = loop {
        if state.s >= length {
            break RunStatus::Completed;
        }
        if state.t >= cfg.max_time {
            break RunStatus::TimedOut;
        }
        match step(&state, cfg) {
            Ok((next, rec)) => {
                records.push(rec);
                state = next;
            }
            Err(e) => {
                log::error!("step {} at s = {} mm failed: {e}", state.steps, state.s);
                break RunStatus::SolverFailed(e);
            }
        }
    };
    let trace = SimTrace::new(records, state.t, state.s);
    let summary = if trace.is_empty() {
        None
    } else {
        let mut s = summarize(&trace, &cfg.network)?;
        s.status = status.label().to_string();
        Some(s)
    };
    log::info!("run {} after {} steps, t = {:.4} s", status.label(), state.steps, state.t);
    Ok(RunOutput {
        trace,
        summary,
        status,
        final_state: state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    VerticalClimb,
    Elbow90,
    Horizontal,
    UPiece,
    FullCircuit,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::VerticalClimb,
        Preset::Elbow90,
        Preset::Horizontal,
        Preset::UPiece,
        Preset::FullCircuit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::VerticalClimb => "vertical_climb",
            Preset::Elbow90 => "elbow90",
            Preset::Horizontal => "horizontal",
            Preset::UPiece => "u_piece",
            Preset::FullCircuit => "full_circuit",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SimError::UnknownPreset(s.to_string()))
    }
}

/// Knobs for preset layouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetOptions {
    /// Length of the straight runs, mm.
    pub straight_length: f64,
    /// Elbow centerline radius; long-radius rule (3r) when `None`.
    pub bend_radius: Option<f64>,
    /// Build the U-piece from two chained 90° elbows instead of one 180° bend.
    pub split_u_piece: bool,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            straight_length: 350.0,
            bend_radius: None,
            split_u_piece: false,
        }
    }
}

/// Named pipe layout and the robot rolls worth running it at: A on the
/// extrados, a 60° entry, and A on the intrados.
pub fn preset_network(
    preset: Preset,
    spec: PipeSpec,
    opts: &PresetOptions,
) -> Result<(PipeNetwork, Vec<f64>), SimError> {
    let vertical = || Segment::straight(opts.straight_length, FRAC_PI_2);
    let horizontal = || Segment::straight(opts.straight_length, 0.0);
    // Vertical-to-horizontal elbow, inclination taken at mid-bend.
    let elbow = || long_radius_elbow(&spec, FRAC_PI_2, 0.0, FRAC_PI_4, opts.bend_radius);
    let u_piece = || -> Result<Vec<Segment>, GeometryError> {
        if opts.split_u_piece {
            let quarter = long_radius_elbow(&spec, FRAC_PI_2, 0.0, 0.0, opts.bend_radius)?;
            Ok(vec![quarter, quarter])
        } else {
            Ok(vec![long_radius_elbow(&spec, PI, 0.0, 0.0, opts.bend_radius)?])
        }
    };
    let segments = match preset {
        Preset::VerticalClimb => vec![vertical()?],
        Preset::Elbow90 => vec![elbow()?],
        Preset::Horizontal => vec![horizontal()?],
        Preset::UPiece => u_piece()?,
        Preset::FullCircuit => {
            let mut v = vec![vertical()?, elbow()?, horizontal()?];
            v.extend(u_piece()?);
            v
        }
    };
    let rolls = vec![0.0, PI / 3.0, PI];
    Ok((PipeNetwork::new(spec, segments)?, rolls))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(preset: Preset, slip_stiffness: f64) -> SimConfig {
        let (net, _) = preset_network(preset, PipeSpec::new(20.0).unwrap(), &PresetOptions::default())
            .unwrap();
        let mut cfg = SimConfig::new(
            ThreeOutputDifferential::compose(1.0, 1.0).unwrap(),
            net,
            SpeedCommand::TargetSpeed(33.62),
        );
        cfg.robot.slip_stiffness = slip_stiffness;
        cfg
    }

    #[test]
    fn straight_step_is_symmetric() {
        let cfg = config(Preset::Horizontal, 1.0);
        let (_, rec) = step(&SimState::initial(), &cfg).unwrap();
        assert_eq!(rec.speed[0], rec.speed[1]);
        assert_eq!(rec.speed[1], rec.speed[2]);
        assert!((rec.body_speed - 33.62).abs() < 1e-9);
        assert_eq!(rec.slip, [0.0; 3]);
    }

    #[test]
    fn elbow_without_slip_reaction_slips() {
        let cfg = config(Preset::Elbow90, 0.0);
        let (_, rec) = step(&SimState::initial(), &cfg).unwrap();
        assert!((rec.speed[0] - rec.speed[1]).abs() < 1e-9);
        assert!(rec.slip[0] < -0.05 && rec.slip[1] > 0.05);
    }

    #[test]
    fn slip_reaction_shrinks_slip() {
        let mut prev = f64::INFINITY;
        for c in [0.1, 1.0, 10.0] {
            let cfg = config(Preset::Elbow90, c);
            let (_, rec) = step(&SimState::initial(), &cfg).unwrap();
            let worst = rec.slip.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            assert!(worst < prev);
            prev = worst;
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = config(Preset::Horizontal, 1.0);
        cfg.dt = 0.0;
        assert!(matches!(run(&cfg), Err(SimError::InvalidParameter { name: "dt", .. })));
        cfg.dt = -1.0;
        assert!(run(&cfg).is_err());
        let mut cfg = config(Preset::Horizontal, 1.0);
        cfg.max_time = 0.0;
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn timeout_keeps_partial_trace() {
        let mut cfg = config(Preset::Horizontal, 1.0);
        cfg.max_time = 1.0;
        let out = run(&cfg).unwrap();
        assert_eq!(out.status, RunStatus::TimedOut);
        assert_eq!(out.trace.len(), 1000);
        assert!(out.final_state.s < cfg.network.centerline_length());
    }

    #[test]
    fn stalled_input_times_out() {
        let mut cfg = config(Preset::Horizontal, 1.0);
        cfg.command = SpeedCommand::InputSpeed(0.0);
        cfg.max_time = 0.05;
        let out = run(&cfg).unwrap();
        assert_eq!(out.status, RunStatus::TimedOut);
        assert_eq!(out.final_state.s, 0.0);
    }

    #[test]
    fn presets() {
        let spec = PipeSpec::new(20.0).unwrap();
        let opts = PresetOptions::default();
        let (v, _) = preset_network(Preset::VerticalClimb, spec, &opts).unwrap();
        assert_eq!(v.segments(), &[Segment::straight(350.0, FRAC_PI_2).unwrap()]);
        let (u, _) = preset_network(Preset::UPiece, spec, &opts).unwrap();
        assert!((u.centerline_length() - PI * 60.0).abs() < 1e-12);
        let split = PresetOptions {
            split_u_piece: true,
            ..opts
        };
        let (u2, _) = preset_network(Preset::UPiece, spec, &split).unwrap();
        assert_eq!(u2.segments().len(), 2);
        assert!((u2.centerline_length() - PI * 60.0).abs() < 1e-12);
        let parts: f64 = [Preset::VerticalClimb, Preset::Elbow90, Preset::Horizontal, Preset::UPiece]
            .iter()
            .map(|p| preset_network(*p, spec, &opts).unwrap().0.centerline_length())
            .sum();
        let (full, _) = preset_network(Preset::FullCircuit, spec, &opts).unwrap();
        assert!((full.centerline_length() - parts).abs() < 1e-9);
        assert!(matches!("spiral".parse::<Preset>(), Err(SimError::UnknownPreset(_))));
        assert_eq!("u_piece".parse::<Preset>().unwrap(), Preset::UPiece);
    }
}
