//! Scenario files.
//!
//! A scenario is a TOML document. Angles are given in degrees, lengths in mm.
//! Unknown keys are rejected so a typo never silently falls back to a default.
//!
//! ```toml
//! name = "elbow"
//! output_dir = "out/elbow"
//!
//! [diff]
//! k = 1.0
//! stage_ratio = 1.0
//!
//! [robot]
//! slip_stiffness = 10.0
//!
//! [network]
//! pipe_radius_mm = 20.0
//! preset = "elbow90"          # or a [[network.segments]] list
//!
//! [sim]
//! dt_s = 0.001
//! v_target_mm_s = 33.62       # or input_speed_rad_s
//! roll_deg = 0.0
//! max_time_s = 120.0
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::geartrain::{GearError, ThreeOutputDifferential};
use crate::kinematics::{KinematicsError, RobotConfig};
use crate::pipegeom::{long_radius_elbow, GeometryError, PipeNetwork, PipeSpec, Segment};
use crate::sim::{preset_network, Preset, PresetOptions, SimConfig, SimError, SpeedCommand};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

impl ScenarioError {
    fn invalid(key: impl Into<String>, message: impl ToString) -> Self {
        ScenarioError::Invalid {
            key: key.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    diff: DiffSection,
    #[serde(default)]
    robot: RobotSection,
    network: NetworkSection,
    sim: SimSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiffSection {
    k: f64,
    #[serde(default = "one")]
    stage_ratio: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for DiffSection {
    fn default() -> Self {
        Self {
            k: 1.0,
            stage_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotSection {
    module_rolls_deg: Option<[f64; 3]>,
    spring_stiffness: Option<f64>,
    spring_preload_mm: Option<f64>,
    spring_max_travel_mm: Option<f64>,
    sprocket_radius_mm: Option<f64>,
    mass_kg: Option<f64>,
    friction_coefficient: Option<f64>,
    rolling_resistance: Option<f64>,
    slip_stiffness: Option<f64>,
    drive_damping: Option<f64>,
    straight_compression_mm: Option<f64>,
    elbow_compression_mm: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    pipe_radius_mm: f64,
    preset: Option<String>,
    bend_radius_mm: Option<f64>,
    straight_length_mm: Option<f64>,
    #[serde(default)]
    split_u_piece: bool,
    segments: Option<Vec<SegmentEntry>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum SegmentEntry {
    Straight {
        length_mm: f64,
        #[serde(default)]
        inclination_deg: f64,
    },
    Elbow {
        bend_angle_deg: f64,
        bend_radius_mm: Option<f64>,
        #[serde(default)]
        bend_plane_roll_deg: f64,
        #[serde(default)]
        inclination_deg: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    #[serde(default = "default_dt")]
    dt_s: f64,
    v_target_mm_s: Option<f64>,
    input_speed_rad_s: Option<f64>,
    #[serde(default)]
    roll_deg: f64,
    #[serde(default = "default_max_time")]
    max_time_s: f64,
}

fn default_dt() -> f64 {
    0.001
}

fn default_max_time() -> f64 {
    600.0
}

/// A validated scenario, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub output_dir: Option<PathBuf>,
    pub config: SimConfig,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        file.build()
    }
}

fn robot_key(e: &KinematicsError) -> String {
    match e {
        KinematicsError::InvalidParameter { name, .. } => {
            let key = match *name {
                "module_rolls" => "module_rolls_deg",
                "spring_preload" => "spring_preload_mm",
                "spring_max_travel" => "spring_max_travel_mm",
                "sprocket_radius" => "sprocket_radius_mm",
                "robot_mass" => "mass_kg",
                "straight_compression" => "straight_compression_mm",
                "elbow_compression" => "elbow_compression_mm",
                other => other,
            };
            format!("robot.{key}")
        }
        _ => "robot".to_string(),
    }
}

fn diff_key(e: &GearError) -> String {
    match e {
        GearError::InvalidParameter { name, .. } => format!("diff.{name}"),
        _ => "diff".to_string(),
    }
}

fn segment_key(prefix: &str, e: &GeometryError) -> String {
    match e {
        GeometryError::InvalidParameter { name, .. } => {
            let key = match *name {
                "length" => "length_mm",
                "bend_angle" => "bend_angle_deg",
                "bend_radius" => "bend_radius_mm",
                "bend_plane_roll" => "bend_plane_roll_deg",
                "inclination" => "inclination_deg",
                "inner_radius" => "pipe_radius_mm",
                other => other,
            };
            format!("{prefix}.{key}")
        }
        _ => prefix.to_string(),
    }
}

impl ScenarioFile {
    fn build(self) -> Result<Scenario, ScenarioError> {
        let diff = ThreeOutputDifferential::compose(self.diff.k, self.diff.stage_ratio)
            .map_err(|e| ScenarioError::invalid(diff_key(&e), e))?;
        let robot = self.robot.build()?;
        let network = self.network.build()?;
        let sim = &self.sim;
        let command = match (sim.v_target_mm_s, sim.input_speed_rad_s) {
            (Some(v), None) => SpeedCommand::TargetSpeed(v),
            (None, Some(w)) => SpeedCommand::InputSpeed(w),
            _ => {
                return Err(ScenarioError::invalid(
                    "sim.v_target_mm_s",
                    "exactly one of `v_target_mm_s` and `input_speed_rad_s` must be given",
                ))
            }
        };
        let config = SimConfig {
            dt: sim.dt_s,
            command,
            robot,
            diff,
            network,
            robot_roll: sim.roll_deg.to_radians(),
            max_time: sim.max_time_s,
        };
        config.validate().map_err(|e| {
            let key = match &e {
                SimError::InvalidParameter { name, .. } => match *name {
                    "dt" => "sim.dt_s",
                    "max_time" => "sim.max_time_s",
                    "robot_roll" => "sim.roll_deg",
                    "input_speed" => "sim.input_speed_rad_s",
                    _ => "sim.v_target_mm_s",
                }
                .to_string(),
                SimError::Kinematics(k) => robot_key(k),
                _ => "sim".to_string(),
            };
            ScenarioError::invalid(key, e)
        })?;
        if self.name.trim().is_empty() {
            return Err(ScenarioError::invalid("name", "must not be empty"));
        }
        Ok(Scenario {
            name: self.name,
            output_dir: self.output_dir,
            config,
        })
    }
}

impl RobotSection {
    fn build(&self) -> Result<RobotConfig, ScenarioError> {
        let mut cfg = RobotConfig::default();
        if let Some(rolls) = self.module_rolls_deg {
            cfg.module_rolls = rolls.map(f64::to_radians);
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.spring_stiffness, self.spring_stiffness);
        set(&mut cfg.spring_preload, self.spring_preload_mm);
        set(&mut cfg.spring_max_travel, self.spring_max_travel_mm);
        set(&mut cfg.sprocket_radius, self.sprocket_radius_mm);
        set(&mut cfg.robot_mass, self.mass_kg);
        set(&mut cfg.friction_coefficient, self.friction_coefficient);
        set(&mut cfg.rolling_resistance, self.rolling_resistance);
        set(&mut cfg.slip_stiffness, self.slip_stiffness);
        set(&mut cfg.drive_damping, self.drive_damping);
        set(&mut cfg.straight_compression, self.straight_compression_mm);
        set(&mut cfg.elbow_compression, self.elbow_compression_mm);
        cfg.validate()
            .map_err(|e| ScenarioError::invalid(robot_key(&e), e))?;
        Ok(cfg)
    }
}

impl NetworkSection {
    fn build(&self) -> Result<PipeNetwork, ScenarioError> {
        let spec = PipeSpec::new(self.pipe_radius_mm)
            .map_err(|e| ScenarioError::invalid("network.pipe_radius_mm", e))?;
        match (&self.preset, &self.segments) {
            (Some(name), None) => {
                let preset: Preset = name
                    .parse()
                    .map_err(|e: SimError| ScenarioError::invalid("network.preset", e))?;
                let mut opts = PresetOptions {
                    bend_radius: self.bend_radius_mm,
                    split_u_piece: self.split_u_piece,
                    ..PresetOptions::default()
                };
                if let Some(len) = self.straight_length_mm {
                    opts.straight_length = len;
                }
                preset_network(preset, spec, &opts)
                    .map(|(net, _)| net)
                    .map_err(|e| {
                        let key = match &e {
                            SimError::Geometry(g) => segment_key("network", g),
                            _ => "network.preset".to_string(),
                        };
                        ScenarioError::invalid(key, e)
                    })
            }
            (None, Some(entries)) => {
                let mut segments = Vec::with_capacity(entries.len());
                for (i, entry) in entries.iter().enumerate() {
                    let prefix = format!("network.segments[{i}]");
                    let seg = match *entry {
                        SegmentEntry::Straight {
                            length_mm,
                            inclination_deg,
                        } => Segment::straight(length_mm, inclination_deg.to_radians()),
                        SegmentEntry::Elbow {
                            bend_angle_deg,
                            bend_radius_mm,
                            bend_plane_roll_deg,
                            inclination_deg,
                        } => long_radius_elbow(
                            &spec,
                            bend_angle_deg.to_radians(),
                            bend_plane_roll_deg.to_radians(),
                            inclination_deg.to_radians(),
                            bend_radius_mm,
                        ),
                    }
                    .map_err(|e| ScenarioError::invalid(segment_key(&prefix, &e), e))?;
                    segments.push(seg);
                }
                PipeNetwork::new(spec, segments)
                    .map_err(|e| ScenarioError::invalid("network.segments", e))
            }
            _ => Err(ScenarioError::invalid(
                "network.preset",
                "exactly one of `preset` and `segments` must be given",
            )),
        }
    }
}
