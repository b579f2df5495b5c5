//! Speed error metrics and per-segment aggregation of simulation traces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipegeom::{PipeNetwork, SegmentKind};
use crate::sim::SimTrace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("speed series is empty")]
    Empty,
    #[error("series lengths differ: {values} values for {timestamps} timestamps")]
    LengthMismatch { timestamps: usize, values: usize },
    #[error("timestamps not strictly increasing at index {index}")]
    NonIncreasing { index: usize },
    #[error("series timestamps differ at index {index}")]
    Misaligned { index: usize },
    #[error("reference value {value} at index {index} is not positive")]
    Undefined { index: usize, value: f64 },
    #[error("trace is empty")]
    EmptyTrace,
    #[error("trace references segment {index} but network has {count}")]
    UnknownSegment { index: usize, count: usize },
}

/// Speed samples (mm/s) on strictly increasing timestamps (s).
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedSeries {
    timestamps: Vec<f64>,
    values: Vec<f64>,
}

impl SpeedSeries {
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>) -> Result<Self, MetricError> {
        if timestamps.len() != values.len() {
            return Err(MetricError::LengthMismatch {
                timestamps: timestamps.len(),
                values: values.len(),
            });
        }
        if timestamps.is_empty() {
            return Err(MetricError::Empty);
        }
        if let Some(index) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(MetricError::NonIncreasing { index: index + 1 });
        }
        Ok(Self { timestamps, values })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Mean absolute percentage error of `sim` against `reference`, in percent.
///
/// A sample where both values are zero contributes nothing; any other
/// non-positive reference sample is an error.
pub fn ape(sim: &SpeedSeries, reference: &SpeedSeries) -> Result<f64, MetricError> {
    if sim.len() != reference.len() {
        return Err(MetricError::Misaligned {
            index: sim.len().min(reference.len()),
        });
    }
    if let Some(index) = sim
        .timestamps
        .iter()
        .zip(&reference.timestamps)
        .position(|(a, b)| a != b)
    {
        return Err(MetricError::Misaligned { index });
    }
    ape_values(&sim.values, &reference.values)
}

fn ape_values(sim: &[f64], reference: &[f64]) -> Result<f64, MetricError> {
    let mut total = 0.0;
    for (index, (s, r)) in sim.iter().zip(reference).enumerate() {
        if *r == 0.0 && *s == 0.0 {
            continue;
        }
        if *r <= 0.0 || !r.is_finite() {
            return Err(MetricError::Undefined { index, value: *r });
        }
        total += (s - r).abs() / r;
    }
    Ok(100.0 * total / sim.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub index: usize,
    pub kind: SegmentKind,
    pub entry_time_s: f64,
    pub exit_time_s: f64,
    pub duration_s: f64,
    pub samples: usize,
    pub mean_speed_mm_s: [f64; 3],
    pub distance_mm: [f64; 3],
    pub ape_pct: [f64; 3],
    pub max_abs_slip: f64,
    pub slip_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub scenario: String,
    pub status: String,
    pub total_time_s: f64,
    pub centerline_distance_mm: f64,
    pub track_distance_mm: [f64; 3],
    pub aggregate_ape_pct: f64,
    pub track_ape_pct: [f64; 3],
    pub max_abs_slip: f64,
    pub slip_events: usize,
    pub segments: Vec<SegmentSummary>,
}

struct Accumulator {
    index: usize,
    kind: SegmentKind,
    entry: f64,
    exit: f64,
    samples: usize,
    distance: [f64; 3],
    speed_sum: [f64; 3],
    ape_sum: [f64; 3],
    max_abs_slip: f64,
    slip_events: usize,
}

/// Per-segment and whole-trace statistics.
///
/// Records are sampled at the start of each step; a record's interval runs to
/// the next record, and the last one to `trace.end_time()`. APE is averaged
/// over samples. The aggregate APE is the mean of the three per-track APEs.
pub fn summarize(trace: &SimTrace, net: &PipeNetwork) -> Result<SimSummary, MetricError> {
    let records = trace.records();
    if records.is_empty() {
        return Err(MetricError::EmptyTrace);
    }
    let mut segments: Vec<Accumulator> = Vec::new();
    let mut track_ape_sum = [0.0; 3];
    let mut track_distance = [0.0; 3];
    let mut max_abs_slip: f64 = 0.0;
    for (k, rec) in records.iter().enumerate() {
        let seg = net.segments().get(rec.segment).ok_or(MetricError::UnknownSegment {
            index: rec.segment,
            count: net.segments().len(),
        })?;
        let next_t = records.get(k + 1).map_or(trace.end_time(), |r| r.t);
        let dt = next_t - rec.t;
        if segments.last().is_none_or(|a| a.index != rec.segment) {
            segments.push(Accumulator {
                index: rec.segment,
                kind: seg.kind(),
                entry: rec.t,
                exit: rec.t,
                samples: 0,
                distance: [0.0; 3],
                speed_sum: [0.0; 3],
                ape_sum: [0.0; 3],
                max_abs_slip: 0.0,
                slip_events: 0,
            });
        }
        let acc = segments.last_mut().expect("pushed above");
        acc.exit = next_t;
        acc.samples += 1;
        for i in 0..3 {
            let err = ape_values(&[rec.speed[i]], &[rec.required[i]]).map_err(|e| match e {
                MetricError::Undefined { value, .. } => MetricError::Undefined { index: k, value },
                other => other,
            })?;
            acc.ape_sum[i] += err;
            track_ape_sum[i] += err;
            acc.speed_sum[i] += rec.speed[i];
            acc.distance[i] += rec.speed[i] * dt;
            track_distance[i] += rec.speed[i] * dt;
            acc.max_abs_slip = acc.max_abs_slip.max(rec.slip[i].abs());
            if rec.traction_exceeded[i] {
                acc.slip_events += 1;
            }
        }
        max_abs_slip = max_abs_slip.max(acc.max_abs_slip);
    }
    let n = records.len() as f64;
    let track_ape = track_ape_sum.map(|s| s / n);
    let segments: Vec<SegmentSummary> = segments
        .into_iter()
        .map(|a| {
            let duration = a.exit - a.entry;
            let mean_speed = if duration > 0.0 {
                a.distance.map(|d| d / duration)
            } else {
                a.speed_sum.map(|s| s / a.samples as f64)
            };
            SegmentSummary {
                index: a.index,
                kind: a.kind,
                entry_time_s: a.entry,
                exit_time_s: a.exit,
                duration_s: duration,
                samples: a.samples,
                mean_speed_mm_s: mean_speed,
                distance_mm: a.distance,
                ape_pct: a.ape_sum.map(|s| s / a.samples as f64),
                max_abs_slip: a.max_abs_slip,
                slip_events: a.slip_events,
            }
        })
        .collect();
    let first = &records[0];
    Ok(SimSummary {
        scenario: String::new(),
        status: String::new(),
        total_time_s: trace.end_time() - first.t,
        centerline_distance_mm: trace.end_position() - first.s,
        track_distance_mm: track_distance,
        aggregate_ape_pct: track_ape.iter().sum::<f64>() / 3.0,
        track_ape_pct: track_ape,
        max_abs_slip,
        slip_events: segments.iter().map(|s| s.slip_events).sum(),
        segments,
    })
}
