//! Run artifacts: `trace.csv`, `summary.json` and `velocity.svg`.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::metrics::SimSummary;
use crate::sim::{SimTrace, TraceRecord};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_FILE: &str = "velocity.svg";

pub const TRACE_COLUMNS: [&str; 15] = [
    "t_s", "s_mm", "segment_idx", "vA_mm_s", "vB_mm_s", "vC_mm_s", "reqA_mm_s", "reqB_mm_s",
    "reqC_mm_s", "slipA", "slipB", "slipC", "NA_N", "NB_N", "NC_N",
];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed trace: {0}")]
    Trace(String),
    #[error("malformed summary: {0}")]
    Summary(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Scientific notation with 10 significant digits.
fn num(v: f64) -> String {
    format!("{v:.9e}")
}

pub fn trace_csv(trace: &SimTrace) -> String {
    let mut out = String::with_capacity(trace.len() * 260 + 200);
    out.push_str(&TRACE_COLUMNS.join(","));
    out.push('\n');
    for r in trace.records() {
        let mut fields = Vec::with_capacity(15);
        fields.push(num(r.t));
        fields.push(num(r.s));
        fields.push(r.segment.to_string());
        fields.extend(r.speed.iter().map(|v| num(*v)));
        fields.extend(r.required.iter().map(|v| num(*v)));
        fields.extend(r.slip.iter().map(|v| num(*v)));
        fields.extend(r.normal_force.iter().map(|v| num(*v)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    t_s: f64,
    s_mm: f64,
    segment_idx: usize,
    #[serde(rename = "vA_mm_s")]
    va: f64,
    #[serde(rename = "vB_mm_s")]
    vb: f64,
    #[serde(rename = "vC_mm_s")]
    vc: f64,
    #[serde(rename = "reqA_mm_s")]
    ra: f64,
    #[serde(rename = "reqB_mm_s")]
    rb: f64,
    #[serde(rename = "reqC_mm_s")]
    rc: f64,
    #[serde(rename = "slipA")]
    sa: f64,
    #[serde(rename = "slipB")]
    sb: f64,
    #[serde(rename = "slipC")]
    sc: f64,
    #[serde(rename = "NA_N")]
    na: f64,
    #[serde(rename = "NB_N")]
    nb: f64,
    #[serde(rename = "NC_N")]
    nc: f64,
}

/// Parses a trace written by [`trace_csv`]. Columns not stored in the file
/// (traction flags, body speed, power) come back zeroed.
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRecord>, OutputError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| OutputError::Trace(e.to_string()))?
        .clone();
    if headers.iter().ne(TRACE_COLUMNS.iter().copied()) {
        return Err(OutputError::Trace(format!("unexpected header {headers:?}")));
    }
    reader
        .deserialize::<CsvRow>()
        .map(|row| {
            let r = row.map_err(|e| OutputError::Trace(e.to_string()))?;
            Ok(TraceRecord {
                t: r.t_s,
                s: r.s_mm,
                segment: r.segment_idx,
                speed: [r.va, r.vb, r.vc],
                required: [r.ra, r.rb, r.rc],
                slip: [r.sa, r.sb, r.sc],
                normal_force: [r.na, r.nb, r.nc],
                traction_exceeded: [false; 3],
                body_speed: 0.0,
                input_power: 0.0,
            })
        })
        .collect()
}

pub fn summary_json(summary: &SimSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}

pub fn parse_summary_json(text: &str) -> Result<SimSummary, OutputError> {
    serde_json::from_str(text).map_err(|e| OutputError::Summary(e.to_string()))
}

const TRACK_COLORS: [&str; 3] = ["#d62728", "#1f77b4", "#2ca02c"];

/// Per-track speed against time, solid for simulated and dashed for the
/// no-slip requirement.
pub fn velocity_svg(records: &[TraceRecord], title: &str) -> String {
    const W: f64 = 800.0;
    const H: f64 = 450.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 50.0;

    let t_max = records.last().map_or(1.0, |r| r.t).max(1e-9);
    let (mut v_min, mut v_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in records {
        for v in r.speed.iter().chain(&r.required) {
            v_min = v_min.min(*v);
            v_max = v_max.max(*v);
        }
    }
    if !v_min.is_finite() {
        (v_min, v_max) = (0.0, 1.0);
    }
    let pad = ((v_max - v_min) * 0.05).max(1e-3 * v_max.abs().max(1.0));
    let (v_lo, v_hi) = (v_min - pad, v_max + pad);
    let x = |t: f64| LEFT + (W - LEFT - RIGHT) * t / t_max;
    let y = |v: f64| TOP + (H - TOP - BOTTOM) * (v_hi - v) / (v_hi - v_lo);

    // Keep files small on long runs.
    let stride = (records.len() / 2000).max(1);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for i in 0..=5 {
        let t = t_max * i as f64 / 5.0;
        let v = v_lo + (v_hi - v_lo) * i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.2}</text>"#,
            x(t),
            H - BOTTOM + 18.0,
            t
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.2}</text>"#,
            LEFT - 6.0,
            y(v) + 4.0,
            v
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">time (s)</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">track speed (mm/s)</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (i, color) in TRACK_COLORS.iter().enumerate() {
        for (dashed, pick) in [(false, 0usize), (true, 1usize)] {
            let mut pts = String::new();
            for r in records.iter().step_by(stride).chain(records.last()) {
                let v = if pick == 0 { r.speed[i] } else { r.required[i] };
                let _ = write!(pts, "{:.2},{:.2} ", x(r.t), y(v));
            }
            let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                pts.trim_end()
            );
        }
        let label = ["A", "B", "C"][i];
        let ly = TOP + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">track {label}</text>"#,
            W - RIGHT - 110.0,
            W - RIGHT - 85.0,
            W - RIGHT - 80.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), OutputError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(contents).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Writes all three artifacts into `dir`, creating it if needed.
pub fn write_run_artifacts(
    dir: &Path,
    trace: &SimTrace,
    summary: Option<&SimSummary>,
    title: &str,
) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_atomic(&dir.join(TRACE_FILE), trace_csv(trace).as_bytes())?;
    if let Some(summary) = summary {
        write_atomic(&dir.join(SUMMARY_FILE), summary_json(summary).as_bytes())?;
    }
    write_atomic(
        &dir.join(PLOT_FILE),
        velocity_svg(trace.records(), title).as_bytes(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64) -> TraceRecord {
        TraceRecord {
            t,
            s: 33.62 * t,
            segment: 0,
            speed: [33.62, 33.62, 1.0 / 3.0],
            required: [33.62; 3],
            slip: [0.0, 0.0, -0.99],
            normal_force: [11.0; 3],
            traction_exceeded: [false; 3],
            body_speed: 33.62,
            input_power: 0.0,
        }
    }

    #[test]
    fn csv_header_and_precision() {
        let trace = SimTrace::from_records(vec![rec(0.0), rec(0.001)]);
        let text = trace_csv(&trace);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_COLUMNS.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 15);
        assert_eq!(row[2], "0");
        // 1/3 keeps at least 9 significant digits.
        assert!(row[5].starts_with("3.333333333"), "{}", row[5]);
        let back = parse_trace_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].t, 0.001);
        assert_eq!(back[0].speed[2], 3.333333333e-1);
    }

    #[test]
    fn empty_trace_has_header() {
        let text = trace_csv(&SimTrace::from_records(vec![]));
        assert_eq!(text.trim_end(), TRACE_COLUMNS.join(","));
    }

    #[test]
    fn bad_header_rejected() {
        assert!(parse_trace_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = velocity_svg(&[rec(0.0), rec(1.0)], "a < b");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(svg.matches("<polyline").count(), 6);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
