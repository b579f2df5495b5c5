//! Pipe networks built from straights and elbows, and the path lengths the
//! three track contact lines follow through them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid geometry `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("pipe network has no segments")]
    EmptyNetwork,
    #[error("centerline coordinate {s} mm outside [0, {length}] mm")]
    OutOfRange { s: f64, length: f64 },
}

fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), GeometryError> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(GeometryError::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}

/// Radial distance from the pipe centerline to the track contact line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipeSpec {
    inner_radius: f64,
}

impl PipeSpec {
    pub fn new(inner_radius: f64) -> Result<Self, GeometryError> {
        check("inner_radius", inner_radius, inner_radius > 0.0, "must be > 0")?;
        Ok(Self { inner_radius })
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Straight,
    Elbow,
}

/// Lengths in mm, angles in rad. `inclination` is the angle of the segment
/// axis above horizontal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Straight {
        length: f64,
        inclination: f64,
    },
    Elbow {
        bend_radius: f64,
        bend_angle: f64,
        /// Roll of the bend plane about the pipe axis; a contact line at this
        /// roll runs along the extrados.
        bend_plane_roll: f64,
        inclination: f64,
    },
}

impl Segment {
    pub fn straight(length: f64, inclination: f64) -> Result<Self, GeometryError> {
        let seg = Segment::Straight {
            length,
            inclination,
        };
        seg.validate_shape()?;
        Ok(seg)
    }

    pub fn elbow(
        spec: &PipeSpec,
        bend_radius: f64,
        bend_angle: f64,
        bend_plane_roll: f64,
        inclination: f64,
    ) -> Result<Self, GeometryError> {
        let seg = Segment::Elbow {
            bend_radius,
            bend_angle,
            bend_plane_roll,
            inclination,
        };
        seg.validate(spec)?;
        Ok(seg)
    }

    fn validate_shape(&self) -> Result<(), GeometryError> {
        match *self {
            Segment::Straight {
                length,
                inclination,
            } => {
                check("length", length, length > 0.0, "straight length must be > 0")?;
                check("inclination", inclination, true, "must be finite")
            }
            Segment::Elbow {
                bend_radius,
                bend_angle,
                bend_plane_roll,
                inclination,
            } => {
                check(
                    "bend_angle",
                    bend_angle,
                    bend_angle > 0.0 && bend_angle <= PI,
                    "bend angle must lie in (0, π]",
                )?;
                check("bend_radius", bend_radius, bend_radius > 0.0, "must be > 0")?;
                check("bend_plane_roll", bend_plane_roll, true, "must be finite")?;
                check("inclination", inclination, true, "must be finite")
            }
        }
    }

    /// Checks the segment against the pipe it belongs to.
    pub fn validate(&self, spec: &PipeSpec) -> Result<(), GeometryError> {
        self.validate_shape()?;
        if let Segment::Elbow { bend_radius, .. } = *self {
            check(
                "bend_radius",
                bend_radius,
                bend_radius > spec.inner_radius(),
                "bend radius must exceed the pipe radius",
            )?;
        }
        Ok(())
    }

    pub fn kind(&self) -> SegmentKind {
        match self {
            Segment::Straight { .. } => SegmentKind::Straight,
            Segment::Elbow { .. } => SegmentKind::Elbow,
        }
    }

    pub fn inclination(&self) -> f64 {
        match *self {
            Segment::Straight { inclination, .. } | Segment::Elbow { inclination, .. } => {
                inclination
            }
        }
    }

    pub fn centerline_length(&self) -> f64 {
        match *self {
            Segment::Straight { length, .. } => length,
            Segment::Elbow {
                bend_radius,
                bend_angle,
                ..
            } => bend_angle * bend_radius,
        }
    }
}

/// Elbow sized by the long-radius rule, bend radius 1.5 × nominal diameter
/// (= 3r), unless `bend_radius` overrides it.
pub fn long_radius_elbow(
    spec: &PipeSpec,
    bend_angle: f64,
    bend_plane_roll: f64,
    inclination: f64,
    bend_radius: Option<f64>,
) -> Result<Segment, GeometryError> {
    let radius = bend_radius.unwrap_or(3.0 * spec.inner_radius());
    Segment::elbow(spec, radius, bend_angle, bend_plane_roll, inclination)
}

/// Length of the contact line at roll `module_roll` through `seg`.
///
/// In an elbow the line stays at constant angle `module_roll − ψ` on the
/// torus, which is a circle of radius `R + r·cos(module_roll − ψ)`.
pub fn track_path_length(seg: &Segment, spec: &PipeSpec, module_roll: f64) -> f64 {
    match *seg {
        Segment::Straight { length, .. } => length,
        Segment::Elbow {
            bend_radius,
            bend_angle,
            bend_plane_roll,
            ..
        } => {
            bend_angle
                * (bend_radius + spec.inner_radius() * (module_roll - bend_plane_roll).cos())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipeNetwork {
    spec: PipeSpec,
    segments: Vec<Segment>,
    #[serde(skip)]
    starts: Vec<f64>,
    #[serde(skip)]
    length: f64,
}

impl PipeNetwork {
    pub fn new(spec: PipeSpec, segments: Vec<Segment>) -> Result<Self, GeometryError> {
        if segments.is_empty() {
            return Err(GeometryError::EmptyNetwork);
        }
        let mut starts = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for seg in &segments {
            seg.validate(&spec)?;
            starts.push(acc);
            acc += seg.centerline_length();
        }
        Ok(Self {
            spec,
            segments,
            starts,
            length: acc,
        })
    }

    pub fn spec(&self) -> &PipeSpec {
        &self.spec
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Centerline coordinate at which each segment begins.
    pub fn segment_starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn centerline_length(&self) -> f64 {
        self.length
    }

    /// Segment index containing centerline coordinate `s` and the offset into
    /// it. A boundary belongs to the later segment, except at the network end.
    pub fn segment_at(&self, s: f64) -> Result<(usize, f64), GeometryError> {
        if !(0.0..=self.length).contains(&s) {
            return Err(GeometryError::OutOfRange {
                s,
                length: self.length,
            });
        }
        let idx = self.starts.partition_point(|&start| start <= s) - 1;
        Ok((idx, s - self.starts[idx]))
    }

    /// Sum of `track_path_length` over all segments.
    pub fn track_path_total(&self, module_roll: f64) -> f64 {
        self.segments
            .iter()
            .map(|seg| track_path_length(seg, &self.spec, module_roll))
            .sum()
    }
}
