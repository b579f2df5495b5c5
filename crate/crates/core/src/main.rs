use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pipeclimb::geartrain::{GearError, LoadCurve, ThreeOutputDifferential};
use pipeclimb::metrics::SimSummary;
use pipeclimb::output::{self, OutputError, PLOT_FILE, SUMMARY_FILE, TRACE_FILE};
use pipeclimb::pipegeom::{long_radius_elbow, track_path_length, PipeNetwork, PipeSpec, Segment};
use pipeclimb::scenario::Scenario;
use pipeclimb::sim::{self, RunStatus};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;

#[derive(Parser)]
#[command(name = "pipeclimb", version, about = "Three-track in-pipe robot with a three-output differential")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the differential for one set of output loads.
    Gearbox {
        /// Mean output speed per unit input speed.
        #[arg(long)]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        stage_ratio: f64,
        /// Input shaft speed, rad/s.
        #[arg(long = "win", allow_hyphen_values = true)]
        input_speed: f64,
        /// Three loads separated by `;`, each `lock` or `c=<val>,tau0=<val>`.
        #[arg(long)]
        loads: String,
    },
    /// Centerline and per-track path lengths.
    Geometry {
        /// Scenario whose network to report.
        #[arg(long, conflicts_with_all = ["straight", "angle_deg"])]
        scenario: Option<PathBuf>,
        /// Radial distance to the track contact line, mm.
        #[arg(long = "r", default_value_t = 20.0)]
        pipe_radius: f64,
        /// Straight segment length, mm.
        #[arg(long)]
        straight: Option<f64>,
        /// Elbow bend angle, degrees.
        #[arg(long)]
        angle_deg: Option<f64>,
        /// Elbow centerline radius, mm (long-radius rule when omitted).
        #[arg(long = "bend-radius")]
        bend_radius: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        plane_roll_deg: f64,
        /// Module rolls in degrees, comma separated.
        #[arg(long, default_value = "0,120,240", allow_hyphen_values = true)]
        rolls: String,
    },
    /// Run one scenario, or several with --sweep.
    Simulate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Output directory. With --sweep each scenario writes to <out>/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the scenarios concurrently.
        #[arg(long)]
        sweep: bool,
    },
    /// Print a finished run's summary and redraw its plot.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PIPECLIMB_LOG", "error"))
        .init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Gearbox {
            k,
            stage_ratio,
            input_speed,
            loads,
        } => cmd_gearbox(k, stage_ratio, input_speed, &loads),
        Command::Geometry {
            scenario,
            pipe_radius,
            straight,
            angle_deg,
            bend_radius,
            plane_roll_deg,
            rolls,
        } => cmd_geometry(
            scenario.as_deref(),
            pipe_radius,
            straight,
            angle_deg,
            bend_radius,
            plane_roll_deg,
            &rolls,
        ),
        Command::Simulate {
            scenarios,
            out,
            sweep,
        } => cmd_simulate(&scenarios, out.as_deref(), sweep),
        Command::Report { out } => cmd_report(&out),
    };
    ExitCode::from(code)
}

fn parse_load(text: &str) -> Result<LoadCurve, String> {
    let text = text.trim();
    if text == "lock" {
        return Ok(LoadCurve::locked());
    }
    let (mut c, mut tau0) = (0.0, 0.0);
    for part in text.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value in `{part}`"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| format!("`{value}` is not a number"))?;
        match key.trim() {
            "c" => c = value,
            "tau0" => tau0 = value,
            other => return Err(format!("unknown load key `{other}`")),
        }
    }
    LoadCurve::new(tau0, c).map_err(|e| e.to_string())
}

fn cmd_gearbox(k: f64, stage_ratio: f64, input_speed: f64, loads: &str) -> u8 {
    let diff = match ThreeOutputDifferential::compose(k, stage_ratio) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let parsed: Result<Vec<LoadCurve>, String> = loads.split(';').map(parse_load).collect();
    let curves: [LoadCurve; 3] = match parsed.map(<[LoadCurve; 3]>::try_from) {
        Ok(Ok(c)) => c,
        Ok(Err(v)) => {
            eprintln!("error: --loads needs exactly 3 entries, got {}", v.len());
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("error: --loads: {e}");
            return EXIT_CONFIG;
        }
    };
    match diff.solve_loaded_speeds(input_speed, &curves) {
        Ok(sol) => {
            println!("output  speed_rad_s        torque_Nmm");
            for (i, id) in diff.output_ids().iter().enumerate() {
                println!(
                    "{id:<6}  {:<17.12} {:.12}",
                    sol.output_speeds[i], sol.output_torques[i]
                );
            }
            println!("input   {:<17.12} {:.12}", sol.input_speed, sol.input_torque);
            println!("residual {:e}", sol.residual);
            println!("{}", serde_json::to_string(&sol).expect("solution serializes"));
            0
        }
        Err(e @ GearError::NoConvergence { .. }) => {
            eprintln!("error: {e}");
            EXIT_SOLVER
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn cmd_geometry(
    scenario: Option<&Path>,
    pipe_radius: f64,
    straight: Option<f64>,
    angle_deg: Option<f64>,
    bend_radius: Option<f64>,
    plane_roll_deg: f64,
    rolls: &str,
) -> u8 {
    let rolls: Result<Vec<f64>, _> = rolls.split(',').map(|r| r.trim().parse::<f64>()).collect();
    let rolls = match rolls {
        Ok(r) if !r.is_empty() => r,
        _ => {
            eprintln!("error: --rolls must be a comma-separated list of degrees");
            return EXIT_CONFIG;
        }
    };
    let network = match build_geometry(scenario, pipe_radius, straight, angle_deg, bend_radius, plane_roll_deg) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let spec = network.spec();
    print!("segment  kind      centerline_mm");
    for r in &rolls {
        print!("  roll{r}_mm");
    }
    println!();
    for (i, seg) in network.segments().iter().enumerate() {
        let kind = match seg {
            Segment::Straight { .. } => "straight",
            Segment::Elbow { .. } => "elbow",
        };
        print!("{i:<7}  {kind:<8}  {:<13.4}", seg.centerline_length());
        for r in &rolls {
            print!("  {:.4}", track_path_length(seg, spec, r.to_radians()));
        }
        println!();
    }
    print!("total    -         {:<13.4}", network.centerline_length());
    for r in &rolls {
        print!("  {:.4}", network.track_path_total(r.to_radians()));
    }
    println!();
    0
}

fn build_geometry(
    scenario: Option<&Path>,
    pipe_radius: f64,
    straight: Option<f64>,
    angle_deg: Option<f64>,
    bend_radius: Option<f64>,
    plane_roll_deg: f64,
) -> Result<PipeNetwork, String> {
    if let Some(path) = scenario {
        return Scenario::load(path)
            .map(|s| s.config.network)
            .map_err(|e| e.to_string());
    }
    let spec = PipeSpec::new(pipe_radius).map_err(|e| e.to_string())?;
    let mut segments = Vec::new();
    if let Some(len) = straight {
        segments.push(Segment::straight(len, 0.0).map_err(|e| e.to_string())?);
    }
    if let Some(angle) = angle_deg {
        if angle <= 0.0 || angle > 180.0 {
            return Err(format!("--angle-deg {angle} must lie in (0, 180]"));
        }
        let seg = long_radius_elbow(&spec, angle * PI / 180.0, plane_roll_deg.to_radians(), 0.0, bend_radius)
            .map_err(|e| e.to_string())?;
        segments.push(seg);
    }
    if segments.is_empty() {
        return Err("give --straight, --angle-deg or --scenario".to_string());
    }
    PipeNetwork::new(spec, segments).map_err(|e| e.to_string())
}

fn status_code(status: &RunStatus) -> u8 {
    match status {
        RunStatus::Completed => 0,
        RunStatus::SolverFailed(_) => EXIT_SOLVER,
        RunStatus::TimedOut => EXIT_TIMEOUT,
    }
}

fn print_summary(summary: &SimSummary) {
    println!(
        "scenario {}  status {}  total {:.4} s  aggregate APE {:.4} %  max |slip| {:.6}",
        summary.scenario,
        summary.status,
        summary.total_time_s,
        summary.aggregate_ape_pct,
        summary.max_abs_slip
    );
    println!("seg  kind      entry_s     duration_s  vA_mm_s   vB_mm_s   vC_mm_s   apeA%    apeB%    apeC%    max|slip|");
    for s in &summary.segments {
        let kind = serde_json::to_value(s.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        println!(
            "{:<3}  {:<8}  {:<10.4}  {:<10.4}  {:<8.3}  {:<8.3}  {:<8.3}  {:<7.4}  {:<7.4}  {:<7.4}  {:.6}",
            s.index,
            kind,
            s.entry_time_s,
            s.duration_s,
            s.mean_speed_mm_s[0],
            s.mean_speed_mm_s[1],
            s.mean_speed_mm_s[2],
            s.ape_pct[0],
            s.ape_pct[1],
            s.ape_pct[2],
            s.max_abs_slip
        );
    }
    println!(
        "track distance mm: A {:.4}  B {:.4}  C {:.4}",
        summary.track_distance_mm[0], summary.track_distance_mm[1], summary.track_distance_mm[2]
    );
}

fn simulate_one(scenario: Scenario, out: PathBuf) -> Result<(RunStatus, Option<SimSummary>), (u8, String)> {
    let result = sim::run(&scenario.config).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    let summary = result.summary.map(|mut s| {
        s.scenario = scenario.name.clone();
        s
    });
    output::write_run_artifacts(&out, &result.trace, summary.as_ref(), &scenario.name)
        .map_err(|e| -> (u8, String) { (1, e.to_string()) })?;
    if let RunStatus::SolverFailed(e) = &result.status {
        eprintln!("{}: solver failure: {e}", scenario.name);
    }
    Ok((result.status, summary))
}

fn cmd_simulate(paths: &[PathBuf], out: Option<&Path>, sweep: bool) -> u8 {
    if paths.len() > 1 && !sweep {
        eprintln!("error: several scenarios given; pass --sweep to run them together");
        return EXIT_CONFIG;
    }
    // Validate everything before any file is written.
    let mut jobs = Vec::with_capacity(paths.len());
    for path in paths {
        let scenario = match Scenario::load(path) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        };
        let dir = match (out, sweep) {
            (Some(o), true) => o.join(&scenario.name),
            (Some(o), false) => o.to_path_buf(),
            (None, _) => scenario
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name)),
        };
        jobs.push((scenario, dir));
    }

    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|(scenario, dir)| {
                let name = scenario.name.clone();
                (name, scope.spawn(move || simulate_one(scenario, dir)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(name, h)| (name, h.join().expect("simulation thread panicked")))
            .collect()
    });

    let mut code = 0;
    for (name, result) in results {
        match result {
            Ok((status, summary)) => {
                if let Some(s) = &summary {
                    print_summary(s);
                }
                code = code.max(status_code(&status));
            }
            Err((c, msg)) => {
                eprintln!("error: {name}: {msg}");
                code = code.max(c);
            }
        }
    }
    code
}

fn cmd_report(dir: &Path) -> u8 {
    let load = || -> Result<SimSummary, OutputError> {
        let path = dir.join(SUMMARY_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| OutputError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let summary = output::parse_summary_json(&text)?;
        let trace_path = dir.join(TRACE_FILE);
        if let Ok(trace) = std::fs::read_to_string(&trace_path) {
            let records = output::parse_trace_csv(&trace)?;
            output::write_atomic(
                &dir.join(PLOT_FILE),
                output::velocity_svg(&records, &summary.scenario).as_bytes(),
            )?;
        }
        Ok(summary)
    };
    match load() {
        Ok(summary) => {
            print_summary(&summary);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
