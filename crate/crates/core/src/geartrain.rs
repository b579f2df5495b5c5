//! Three-output open differential.
//!
//! The transmission is treated as a constraint network: the arithmetic mean
//! of the three output shaft speeds is locked to the (scaled) input speed, and
//! every output that is free to turn carries the same torque. Loads enter as
//! monotone speed→torque curves, and the common torque is found by bisection
//! on the scalar mismatch between the speeds the loads admit and the speed the
//! input imposes.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Hard cap on bisection iterations.
pub const MAX_ITERATIONS: usize = 10_000;

/// Relative tolerance on the bisection target `g(τ)`.
pub const ROOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GearError {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("load curve on output {output} is not monotone non-decreasing")]
    NonMonotone { output: Output },
    #[error("all outputs locked but input speed is {input_speed} rad/s")]
    Infeasible { input_speed: f64 },
    #[error("bisection did not converge after {iterations} iterations; last bracket [{lo}, {hi}] N·mm")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },
    #[error("input speed is zero while outputs deliver {power} N·mm/s")]
    UndefinedPower { power: f64 },
}

/// Output shaft identifier. Outputs are always ordered A, B, C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Output {
    A,
    B,
    C,
}

impl Output {
    pub const ALL: [Output; 3] = [Output::A, Output::B, Output::C];

    pub fn index(self) -> usize {
        match self {
            Output::A => 0,
            Output::B => 1,
            Output::C => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Output> {
        Output::ALL.get(i).copied()
    }
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Output::A => "A",
            Output::B => "B",
            Output::C => "C",
        };
        f.pad(s)
    }
}

/// Resisting torque seen by one output shaft: `τ(ω) = τ0·sign(ω) + c·ω`.
///
/// A locked curve pins its output at zero speed regardless of torque.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoadCurve {
    coulomb_torque: f64,
    viscous_coeff: f64,
    locked: bool,
}

impl LoadCurve {
    /// `coulomb_torque` in N·mm, `viscous_coeff` in N·mm·s/rad. Negative
    /// values would make the curve decreasing and are rejected.
    pub fn new(coulomb_torque: f64, viscous_coeff: f64) -> Result<Self, GearError> {
        if !coulomb_torque.is_finite() || coulomb_torque < 0.0 {
            return Err(GearError::InvalidParameter {
                name: "coulomb_torque",
                value: coulomb_torque,
                reason: "must be finite and >= 0",
            });
        }
        if !viscous_coeff.is_finite() || viscous_coeff < 0.0 {
            return Err(GearError::InvalidParameter {
                name: "viscous_coeff",
                value: viscous_coeff,
                reason: "must be finite and >= 0",
            });
        }
        Ok(Self {
            coulomb_torque,
            viscous_coeff,
            locked: false,
        })
    }

    pub fn viscous(viscous_coeff: f64) -> Result<Self, GearError> {
        Self::new(0.0, viscous_coeff)
    }

    pub fn locked() -> Self {
        Self {
            coulomb_torque: 0.0,
            viscous_coeff: 0.0,
            locked: true,
        }
    }

    pub fn coulomb_torque(&self) -> f64 {
        self.coulomb_torque
    }

    pub fn viscous_coeff(&self) -> f64 {
        self.viscous_coeff
    }

    pub fn is_locked(&self) -> bool {
        self.locked
    }

    pub fn torque(&self, speed: f64) -> f64 {
        let coulomb = if speed > 0.0 {
            self.coulomb_torque
        } else if speed < 0.0 {
            -self.coulomb_torque
        } else {
            0.0
        };
        coulomb + self.viscous_coeff * speed
    }

    /// Forward speed at which the curve resists with `torque`.
    ///
    /// Returns `None` when the curve is rigid (`c = 0`) and the torque
    /// exceeds the Coulomb threshold, where no finite speed exists.
    pub fn inverse(&self, torque: f64) -> Option<f64> {
        if self.locked || torque <= self.coulomb_torque {
            return Some(0.0);
        }
        if self.viscous_coeff == 0.0 {
            None
        } else {
            Some((torque - self.coulomb_torque) / self.viscous_coeff)
        }
    }

    /// Samples the curve on a speed grid and checks it never decreases.
    fn check_monotone(&self, output: Output, max_speed: f64) -> Result<(), GearError> {
        let top = max_speed.max(1.0);
        let mut prev = self.torque(0.0);
        for i in 1..=16 {
            let t = self.torque(top * i as f64 / 16.0);
            if !t.is_finite() || t < prev {
                return Err(GearError::NonMonotone { output });
            }
            prev = t;
        }
        Ok(())
    }
}

/// Speeds and torques of one admissible transmission state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedSolution {
    /// rad/s
    pub input_speed: f64,
    /// rad/s, ordered A, B, C
    pub output_speeds: [f64; 3],
    /// N·mm, ordered A, B, C
    pub output_torques: [f64; 3],
    /// N·mm
    pub input_torque: f64,
    /// kinematic residual of the solved state
    pub residual: f64,
}

impl SpeedSolution {
    pub fn output_power(&self) -> f64 {
        self.output_speeds
            .iter()
            .zip(&self.output_torques)
            .map(|(w, t)| w * t)
            .sum()
    }
}

/// Input torque from lossless power balance, `τ_in = Σ τ_i·ω_i / ω_in`.
pub fn input_torque(solution: &SpeedSolution) -> Result<f64, GearError> {
    let power = solution.output_power();
    if solution.input_speed == 0.0 {
        if power == 0.0 {
            return Ok(0.0);
        }
        return Err(GearError::UndefinedPower { power });
    }
    Ok(power / solution.input_speed)
}

/// Bisection settings for [`ThreeOutputDifferential::solve_loaded_speeds_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub max_iterations: usize,
    /// Upper torque bracket to start from. Expanded by doubling if it does
    /// not contain the root.
    pub initial_upper: Option<f64>,
}

impl Default for Bisection {
    fn default() -> Self {
        Self {
            max_iterations: MAX_ITERATIONS,
            initial_upper: None,
        }
    }
}

/// Three-output open differential built from two-output stages.
///
/// `input_ratio` (k) is the mean output speed per unit input speed. The stage
/// ratio only scales the internal shaft between the two stages and does not
/// appear in the output constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreeOutputDifferential {
    input_ratio: f64,
    stage_ratio: f64,
}

impl ThreeOutputDifferential {
    pub fn compose(input_ratio: f64, stage_ratio: f64) -> Result<Self, GearError> {
        if !input_ratio.is_finite() || input_ratio <= 0.0 {
            return Err(GearError::InvalidParameter {
                name: "k",
                value: input_ratio,
                reason: "input ratio must be > 0",
            });
        }
        if !stage_ratio.is_finite() || stage_ratio <= 0.0 {
            return Err(GearError::InvalidParameter {
                name: "stage_ratio",
                value: stage_ratio,
                reason: "stage ratio must be > 0",
            });
        }
        Ok(Self {
            input_ratio,
            stage_ratio,
        })
    }

    pub fn input_ratio(&self) -> f64 {
        self.input_ratio
    }

    pub fn stage_ratio(&self) -> f64 {
        self.stage_ratio
    }

    pub fn output_ids(&self) -> [Output; 3] {
        Output::ALL
    }

    /// `mean(ω_out) − k·ω_in`; zero iff the speeds are admissible.
    pub fn kinematic_residual(&self, output_speeds: [f64; 3], input_speed: f64) -> f64 {
        output_speeds.iter().sum::<f64>() / 3.0 - self.input_ratio * input_speed
    }

    /// Speed of the shaft joining the first stage to the B/C stage.
    pub fn intermediate_speed(&self, output_speeds: [f64; 3]) -> f64 {
        self.stage_ratio * (output_speeds[1] + output_speeds[2]) / 2.0
    }

    /// Load-free solve: locked outputs stand still and the remaining speed is
    /// shared equally by the free ones.
    pub fn solve_free_speeds(
        &self,
        input_speed: f64,
        locked: &[Output],
    ) -> Result<SpeedSolution, GearError> {
        let mut is_locked = [false; 3];
        for o in locked {
            is_locked[o.index()] = true;
        }
        let free = is_locked.iter().filter(|l| !**l).count();
        let total = 3.0 * self.input_ratio * input_speed;
        if free == 0 {
            if input_speed != 0.0 {
                return Err(GearError::Infeasible { input_speed });
            }
            return Ok(self.finish(input_speed, [0.0; 3], [0.0; 3]));
        }
        let share = total / free as f64;
        let speeds = is_locked.map(|l| if l { 0.0 } else { share });
        Ok(self.finish(input_speed, speeds, [0.0; 3]))
    }

    pub fn solve_loaded_speeds(
        &self,
        input_speed: f64,
        loads: &[LoadCurve; 3],
    ) -> Result<SpeedSolution, GearError> {
        self.solve_loaded_speeds_with(input_speed, loads, &Bisection::default())
    }

    /// Finds the common output torque τ* at which the speeds the loads admit
    /// satisfy the mean constraint.
    ///
    /// Negative input speeds are solved as the mirrored forward problem.
    pub fn solve_loaded_speeds_with(
        &self,
        input_speed: f64,
        loads: &[LoadCurve; 3],
        settings: &Bisection,
    ) -> Result<SpeedSolution, GearError> {
        if !input_speed.is_finite() {
            return Err(GearError::InvalidParameter {
                name: "input_speed",
                value: input_speed,
                reason: "must be finite",
            });
        }
        let target = 3.0 * self.input_ratio * input_speed.abs();
        for (o, load) in Output::ALL.iter().zip(loads) {
            load.check_monotone(*o, target)?;
        }
        let (speeds, torque) = solve_common_torque(loads, target, settings)?;
        let sign = if input_speed < 0.0 { -1.0 } else { 1.0 };
        Ok(self.finish(input_speed, speeds.map(|w| sign * w), [sign * torque; 3]))
    }

    fn finish(&self, input_speed: f64, speeds: [f64; 3], torques: [f64; 3]) -> SpeedSolution {
        let mut sol = SpeedSolution {
            input_speed,
            output_speeds: speeds,
            output_torques: torques,
            input_torque: 0.0,
            residual: self.kinematic_residual(speeds, input_speed),
        };
        // Power is zero whenever the input is still (all outputs stand still too).
        sol.input_torque = input_torque(&sol).unwrap_or(0.0);
        sol
    }
}

fn speeds_at(loads: &[LoadCurve; 3], torque: f64) -> [f64; 3] {
    loads.map(|l| l.inverse(torque).unwrap_or(f64::INFINITY))
}

/// Solves `Σ ω_i(τ) = target` for τ ≥ 0. Returns speeds and τ*.
fn solve_common_torque(
    loads: &[LoadCurve; 3],
    target: f64,
    settings: &Bisection,
) -> Result<([f64; 3], f64), GearError> {
    let free: Vec<usize> = (0..3).filter(|&i| !loads[i].is_locked()).collect();
    if free.is_empty() {
        if target != 0.0 {
            return Err(GearError::Infeasible {
                input_speed: target,
            });
        }
        return Ok(([0.0; 3], 0.0));
    }
    if target == 0.0 {
        return Ok(([0.0; 3], 0.0));
    }
    let tol = ROOT_TOLERANCE * target.max(1.0);

    // Rigid (purely Coulomb) curves cap the common torque at their threshold.
    let rigid_cap = free
        .iter()
        .filter(|&&i| loads[i].viscous_coeff() == 0.0)
        .map(|&i| loads[i].coulomb_torque())
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))));

    let viscous_sum = |torque: f64| -> f64 {
        free.iter()
            .filter(|&&i| loads[i].viscous_coeff() > 0.0)
            .map(|&i| loads[i].inverse(torque).unwrap_or(0.0))
            .sum()
    };

    if let Some(cap) = rigid_cap {
        let at_cap = viscous_sum(cap);
        if at_cap < target - tol {
            // Rigid outputs at the cap absorb the remaining speed equally.
            let ties: Vec<usize> = free
                .iter()
                .copied()
                .filter(|&i| loads[i].viscous_coeff() == 0.0 && loads[i].coulomb_torque() == cap)
                .collect();
            let share = (target - at_cap) / ties.len() as f64;
            let mut speeds = [0.0; 3];
            for &i in &free {
                speeds[i] = if ties.contains(&i) {
                    share
                } else {
                    loads[i].inverse(cap).unwrap_or(0.0)
                };
            }
            return Ok((speeds, cap));
        }
        let torque = bisect(|t| viscous_sum(t) - target, 0.0, Some(cap), tol, settings)?;
        let torque = polish(loads, &free, target, torque, Some(cap));
        let speeds_sum: f64 = viscous_sum(torque);
        if (speeds_sum - target).abs() > tol {
            return Err(GearError::NoConvergence {
                iterations: settings.max_iterations,
                lo: torque,
                hi: cap,
            });
        }
        let mut speeds = [0.0; 3];
        for &i in &free {
            speeds[i] = loads[i].inverse(torque).unwrap_or(0.0);
        }
        return Ok((speeds, torque));
    }

    let g = |t: f64| -> f64 { speeds_at(loads, t).iter().sum::<f64>() - target };
    let torque = bisect(g, 0.0, None, tol, settings)?;
    let torque = polish(loads, &free, target, torque, None);
    if g(torque).abs() > tol {
        return Err(GearError::NoConvergence {
            iterations: settings.max_iterations,
            lo: torque,
            hi: torque,
        });
    }
    let mut speeds = speeds_at(loads, torque);
    for (i, s) in speeds.iter_mut().enumerate() {
        if loads[i].is_locked() {
            *s = 0.0;
        }
    }
    Ok((speeds, torque))
}

/// Bisection on a non-decreasing `g` with `g(lo) <= 0`. When `cap` is set the
/// root is known to lie in `[lo, cap]`.
fn bisect<F: Fn(f64) -> f64>(
    g: F,
    mut lo: f64,
    cap: Option<f64>,
    tol: f64,
    settings: &Bisection,
) -> Result<f64, GearError> {
    let mut iterations = 0;
    let mut hi = match cap {
        Some(c) => c,
        None => settings.initial_upper.filter(|h| *h > lo).unwrap_or(1.0),
    };
    if cap.is_none() {
        while g(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            iterations += 1;
            if iterations >= settings.max_iterations || !hi.is_finite() {
                return Err(GearError::NoConvergence { iterations, lo, hi });
            }
        }
    }
    if g(hi).abs() <= tol {
        return Ok(hi);
    }
    while iterations < settings.max_iterations {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Bracket collapsed to adjacent floats; the polish step decides.
            return Ok(if g(lo).abs() < g(hi).abs() { lo } else { hi });
        }
        let gm = g(mid);
        if gm.abs() <= tol {
            return Ok(mid);
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Err(GearError::NoConvergence { iterations, lo, hi })
}

/// One exact step on the final linear piece: with the active set fixed, the
/// curves are affine in τ and the constraint has a closed-form root.
fn polish(
    loads: &[LoadCurve; 3],
    free: &[usize],
    target: f64,
    torque: f64,
    cap: Option<f64>,
) -> f64 {
    let active: Vec<usize> = free
        .iter()
        .copied()
        .filter(|&i| loads[i].viscous_coeff() > 0.0 && torque > loads[i].coulomb_torque())
        .collect();
    let residual = |t: f64| -> f64 {
        free.iter()
            .map(|&i| loads[i].inverse(t).unwrap_or(f64::INFINITY))
            .sum::<f64>()
            - target
    };
    if active.is_empty() {
        return torque;
    }
    let inv_sum: f64 = active.iter().map(|&i| 1.0 / loads[i].viscous_coeff()).sum();
    let offset: f64 = active
        .iter()
        .map(|&i| loads[i].coulomb_torque() / loads[i].viscous_coeff())
        .sum();
    let candidate = (target + offset) / inv_sum;
    if !candidate.is_finite() || cap.is_some_and(|c| candidate > c) {
        return torque;
    }
    if residual(candidate).abs() < residual(torque).abs() {
        candidate
    } else {
        torque
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ThreeOutputDifferential {
        ThreeOutputDifferential::compose(1.0, 1.0).unwrap()
    }

    #[test]
    fn compose_rejects_nonpositive_ratio() {
        assert!(matches!(
            ThreeOutputDifferential::compose(0.0, 1.0),
            Err(GearError::InvalidParameter { name: "k", .. })
        ));
        assert!(ThreeOutputDifferential::compose(1.0, -2.0).is_err());
    }

    #[test]
    fn half_ratio_admits_uniform_solution() {
        let d = ThreeOutputDifferential::compose(0.5, 1.0).unwrap();
        assert_eq!(d.kinematic_residual([1.0, 1.0, 1.0], 2.0), 0.0);
        let sol = d.solve_free_speeds(2.0, &[]).unwrap();
        assert_eq!(sol.output_speeds, [1.0, 1.0, 1.0]);
    }

    #[test]
    fn residual_examples() {
        let d = unit();
        assert_eq!(d.kinematic_residual([1.0, 1.0, 1.0], 1.0), 0.0);
        assert_eq!(d.kinematic_residual([1.5, 0.75, 0.75], 1.0), 0.0);
        assert_eq!(d.kinematic_residual([1.0, 1.0, 1.0], 2.0), -1.0);
    }

    #[test]
    fn free_speeds_redistribute_around_locks() {
        let d = unit();
        assert_eq!(d.solve_free_speeds(1.0, &[]).unwrap().output_speeds, [1.0; 3]);
        assert_eq!(
            d.solve_free_speeds(1.0, &[Output::A]).unwrap().output_speeds,
            [0.0, 1.5, 1.5]
        );
        assert_eq!(
            d.solve_free_speeds(1.0, &[Output::A, Output::B]).unwrap().output_speeds,
            [0.0, 0.0, 3.0]
        );
        assert!(matches!(
            d.solve_free_speeds(1.0, &Output::ALL),
            Err(GearError::Infeasible { .. })
        ));
        assert!(d.solve_free_speeds(0.0, &Output::ALL).is_ok());
    }

    #[test]
    fn equal_loads_split_evenly() {
        let l = LoadCurve::viscous(1.0).unwrap();
        let sol = unit().solve_loaded_speeds(1.0, &[l; 3]).unwrap();
        for w in sol.output_speeds {
            assert!((w - 1.0).abs() < 1e-12);
        }
        assert!((sol.output_torques[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uneven_viscous_loads_closed_form() {
        let loads = [
            LoadCurve::viscous(1.0).unwrap(),
            LoadCurve::viscous(1.0).unwrap(),
            LoadCurve::viscous(2.0).unwrap(),
        ];
        let sol = unit().solve_loaded_speeds(1.0, &loads).unwrap();
        let want = [1.2, 1.2, 0.6];
        for (w, e) in sol.output_speeds.iter().zip(want) {
            assert!((w - e).abs() < 1e-9, "{w} vs {e}");
        }
        assert!((sol.output_torques[2] - 1.2).abs() < 1e-9);
        assert!((input_torque(&sol).unwrap() - 3.6).abs() < 1e-9);
    }

    #[test]
    fn locked_output_reduces_to_free_case() {
        let l = LoadCurve::viscous(1.0).unwrap();
        let sol = unit()
            .solve_loaded_speeds(1.0, &[LoadCurve::locked(), l, l])
            .unwrap();
        assert_eq!(sol.output_speeds[0], 0.0);
        assert!((sol.output_speeds[1] - 1.5).abs() < 1e-12);
        assert!((sol.output_speeds[2] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rigid_curves_take_the_remainder() {
        // Two pure-Coulomb outputs with the same threshold and one viscous.
        let rigid = LoadCurve::new(2.0, 0.0).unwrap();
        let visc = LoadCurve::viscous(1.0).unwrap();
        let sol = unit().solve_loaded_speeds(1.0, &[rigid, rigid, visc]).unwrap();
        // At τ = 2 the viscous output admits 2 rad/s; rigid ones share the last 1.
        assert!((sol.output_speeds[2] - 2.0).abs() < 1e-12);
        assert!((sol.output_speeds[0] - 0.5).abs() < 1e-12);
        assert!(sol.residual.abs() < 1e-12);

        // Threshold high enough that the viscous output carries it all.
        let stiff = LoadCurve::new(10.0, 0.0).unwrap();
        let sol = unit().solve_loaded_speeds(1.0, &[stiff, stiff, visc]).unwrap();
        assert!((sol.output_speeds[2] - 3.0).abs() < 1e-9);
        assert_eq!(sol.output_speeds[0], 0.0);
    }

    #[test]
    fn reverse_input_mirrors_forward() {
        let loads = [
            LoadCurve::new(0.3, 1.0).unwrap(),
            LoadCurve::new(0.1, 2.0).unwrap(),
            LoadCurve::new(0.0, 0.5).unwrap(),
        ];
        let d = unit();
        let fwd = d.solve_loaded_speeds(2.0, &loads).unwrap();
        let rev = d.solve_loaded_speeds(-2.0, &loads).unwrap();
        for i in 0..3 {
            assert_eq!(fwd.output_speeds[i], -rev.output_speeds[i]);
            assert_eq!(fwd.output_torques[i], -rev.output_torques[i]);
        }
    }

    #[test]
    fn negative_coefficients_rejected() {
        assert!(LoadCurve::new(-1.0, 1.0).is_err());
        assert!(LoadCurve::new(0.0, -1.0).is_err());
        assert!(LoadCurve::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn input_torque_examples() {
        let sol = SpeedSolution {
            input_speed: 1.0,
            output_speeds: [1.0; 3],
            output_torques: [1.0; 3],
            input_torque: 0.0,
            residual: 0.0,
        };
        assert_eq!(input_torque(&sol).unwrap(), 3.0);
        let none = SpeedSolution {
            output_torques: [0.0; 3],
            ..sol
        };
        assert_eq!(input_torque(&none).unwrap(), 0.0);
        let stalled = SpeedSolution {
            input_speed: 0.0,
            ..sol
        };
        assert!(matches!(
            input_torque(&stalled),
            Err(GearError::UndefinedPower { .. })
        ));
    }

    #[test]
    fn iteration_cap_reports_bracket() {
        let loads = [LoadCurve::viscous(1.0).unwrap(); 3];
        let err = unit()
            .solve_loaded_speeds_with(
                1.0,
                &loads,
                &Bisection {
                    max_iterations: 2,
                    initial_upper: Some(1e-9),
                },
            )
            .unwrap_err();
        assert!(matches!(err, GearError::NoConvergence { .. }));
    }
}
