//! Track-level mechanics: no-slip speed requirements, spring normal forces,
//! traction limits and the load curve each track presents to the gearbox.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geartrain::{GearError, LoadCurve};
use crate::pipegeom::{PipeSpec, Segment};

/// Standard gravity in N/kg.
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("invalid robot parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("track {track} compression {compression} mm outside spring travel [0, {max_travel}] mm")]
    CompressionOutOfRange {
        track: usize,
        compression: f64,
        max_travel: f64,
    },
    #[error("required speed is zero but actual speed is {actual} mm/s")]
    DegenerateSlip { actual: f64 },
    #[error(transparent)]
    Load(#[from] GearError),
}

/// Mechanical parameters of the three-module robot.
///
/// Lengths in mm, forces in N, mass in kg, angles in rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    /// Roll of modules A, B, C about the pipe axis.
    pub module_rolls: [f64; 3],
    /// N/mm
    pub spring_stiffness: f64,
    pub spring_preload: f64,
    pub spring_max_travel: f64,
    pub sprocket_radius: f64,
    pub robot_mass: f64,
    pub friction_coefficient: f64,
    pub rolling_resistance: f64,
    /// Wall reaction per unit slip per newton of normal force.
    pub slip_stiffness: f64,
    /// Viscous drag of each track drive, N·mm·s/rad.
    pub drive_damping: f64,
    /// Nominal spring compression in straights.
    pub straight_compression: f64,
    /// Nominal spring compression in elbows.
    pub elbow_compression: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            module_rolls: [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0],
            spring_stiffness: 2.0,
            spring_preload: 1.5,
            spring_max_travel: 16.0,
            sprocket_radius: 20.0,
            robot_mass: 1.0,
            friction_coefficient: 0.5,
            rolling_resistance: 0.01,
            slip_stiffness: 1.0,
            drive_damping: 1.0,
            straight_compression: 4.0,
            elbow_compression: 4.0,
        }
    }
}

fn param(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), KinematicsError> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(KinematicsError::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}

impl RobotConfig {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        param("spring_stiffness", self.spring_stiffness, self.spring_stiffness > 0.0, "must be > 0")?;
        param("spring_max_travel", self.spring_max_travel, self.spring_max_travel >= 0.0, "must be >= 0")?;
        param(
            "spring_preload",
            self.spring_preload,
            (0.0..=self.spring_max_travel).contains(&self.spring_preload),
            "must lie in [0, spring_max_travel]",
        )?;
        param("friction_coefficient", self.friction_coefficient, self.friction_coefficient > 0.0, "must be > 0")?;
        param("sprocket_radius", self.sprocket_radius, self.sprocket_radius > 0.0, "must be > 0")?;
        param("robot_mass", self.robot_mass, self.robot_mass >= 0.0, "must be >= 0")?;
        param("rolling_resistance", self.rolling_resistance, self.rolling_resistance >= 0.0, "must be >= 0")?;
        param("slip_stiffness", self.slip_stiffness, self.slip_stiffness >= 0.0, "must be >= 0")?;
        param("drive_damping", self.drive_damping, self.drive_damping >= 0.0, "must be >= 0")?;
        for (name, v) in [
            ("straight_compression", self.straight_compression),
            ("elbow_compression", self.elbow_compression),
        ] {
            param(name, v, (0.0..=self.spring_max_travel).contains(&v), "must lie in [0, spring_max_travel]")?;
        }
        for (i, r) in self.module_rolls.iter().enumerate() {
            param("module_rolls", *r, true, "must be finite")?;
            for other in &self.module_rolls[i + 1..] {
                let gap = (r - other).rem_euclid(2.0 * PI);
                param("module_rolls", *r, gap > 1e-9 && gap < 2.0 * PI - 1e-9, "module rolls must be pairwise distinct")?;
            }
        }
        Ok(())
    }

    /// Nominal compression of every module's springs in `seg`.
    pub fn compressions(&self, seg: &Segment) -> [f64; 3] {
        match seg {
            Segment::Straight { .. } => [self.straight_compression; 3],
            Segment::Elbow { .. } => [self.elbow_compression; 3],
        }
    }
}

/// Per-track contact quantities for one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactState {
    pub compression: [f64; 3],
    pub normal_force: [f64; 3],
    pub required_speed: [f64; 3],
    pub actual_speed: [f64; 3],
    pub slip: [f64; 3],
}

/// Ratio of each track's contact path to the centerline, `(R + r·cos(φ_i + roll − ψ))/R`.
/// All ones in a straight.
pub fn path_factors(seg: &Segment, spec: &PipeSpec, config: &RobotConfig, robot_roll: f64) -> [f64; 3] {
    match *seg {
        Segment::Straight { .. } => [1.0; 3],
        Segment::Elbow {
            bend_radius,
            bend_plane_roll,
            ..
        } => config.module_rolls.map(|phi| {
            (bend_radius + spec.inner_radius() * (phi + robot_roll - bend_plane_roll).cos()) / bend_radius
        }),
    }
}

/// Track speeds (mm/s) that let the body advance at `body_speed` without slip.
pub fn required_track_speeds(
    body_speed: f64,
    seg: &Segment,
    spec: &PipeSpec,
    config: &RobotConfig,
    robot_roll: f64,
) -> [f64; 3] {
    path_factors(seg, spec, config, robot_roll).map(|f| body_speed * f)
}

/// Spring force pressing each module against the wall, `K_s·(δ0 + δ_i)`.
pub fn normal_forces(config: &RobotConfig, compression: [f64; 3]) -> Result<[f64; 3], KinematicsError> {
    let mut out = [0.0; 3];
    for (i, d) in compression.iter().enumerate() {
        if !(0.0..=config.spring_max_travel).contains(d) {
            return Err(KinematicsError::CompressionOutOfRange {
                track: i,
                compression: *d,
                max_travel: config.spring_max_travel,
            });
        }
        out[i] = config.spring_stiffness * (config.spring_preload + d);
    }
    Ok(out)
}

/// Largest tangential force the contact can carry without slipping.
pub fn traction_limit(normal_force: f64, friction_coefficient: f64) -> f64 {
    friction_coefficient * normal_force
}

/// `(v − v_req)/v_req`; positive when the track overspeeds (slides), negative
/// when it is dragged.
pub fn slip_ratio(actual: f64, required: f64) -> Result<f64, KinematicsError> {
    if required == 0.0 {
        if actual == 0.0 {
            return Ok(0.0);
        }
        return Err(KinematicsError::DegenerateSlip { actual });
    }
    Ok((actual - required) / required)
}

/// Weight component along the pipe axis carried by one track (N).
pub fn gravity_share(config: &RobotConfig, seg: &Segment) -> f64 {
    config.robot_mass * GRAVITY * seg.inclination().sin() / 3.0
}

/// Load curve one track presents to its output shaft.
///
/// The Coulomb part is rolling resistance plus the uphill weight share. The
/// viscous part is the drive damping plus the wall's slip reaction
/// `c_slip·N·s`, linearised in shaft speed about `reference_speed` (mm/s):
/// `d(c_slip·N·r_s·s)/dω = c_slip·N·r_s²/v_ref`.
pub fn track_load_curve(
    normal_force: f64,
    gravity_share: f64,
    reference_speed: f64,
    config: &RobotConfig,
) -> Result<LoadCurve, KinematicsError> {
    param("normal_force", normal_force, normal_force >= 0.0, "must be >= 0")?;
    let rs = config.sprocket_radius;
    let coulomb = rs * (config.rolling_resistance * normal_force + gravity_share.max(0.0));
    let slip_term = if reference_speed > 0.0 {
        config.slip_stiffness * normal_force * rs * rs / reference_speed
    } else {
        0.0
    };
    Ok(LoadCurve::new(coulomb, config.drive_damping + slip_term)?)
}

/// Tangential force the wall must supply to track `i` (N): rolling and weight
/// share, drive damping at shaft speed `shaft_speed`, and slip reaction.
pub fn tangential_force(
    normal_force: f64,
    gravity_share: f64,
    shaft_speed: f64,
    slip: f64,
    config: &RobotConfig,
) -> f64 {
    config.rolling_resistance * normal_force
        + gravity_share
        + config.drive_damping * shaft_speed / config.sprocket_radius
        + config.slip_stiffness * normal_force * slip
}
