//! Quasi-static simulation of a three-track in-pipe climbing robot whose
//! tracks share one three-output open differential.
//!
//! - [`geartrain`]: the differential as a speed/torque constraint network.
//! - [`pipegeom`]: straights, elbows and per-track contact path lengths.
//! - [`kinematics`]: no-slip speed requirements, spring forces, traction, load curves.
//! - [`sim`]: fixed-step traversal of a pipe network.
//! - [`metrics`]: APE and per-segment summaries.
//! - [`scenario`] and [`output`]: scenario files and the CSV/JSON/SVG artifacts.

pub mod geartrain;
pub mod kinematics;
pub mod metrics;
pub mod output;
pub mod pipegeom;
pub mod scenario;
pub mod sim;

pub use geartrain::{LoadCurve, Output, SpeedSolution, ThreeOutputDifferential};
pub use pipegeom::{PipeNetwork, PipeSpec, Segment};
pub use sim::{run, SimConfig, SimSummary, SimTrace};
