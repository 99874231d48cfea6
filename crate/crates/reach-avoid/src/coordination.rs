//! Dual-mode defense coordination for one coalition against one attacker.
//!
//! The coalition measures the squared distance between the attacker's
//! safe-reachable set and the target. While that value is positive the
//! defenders steer at full speed toward the minimizing point of the
//! safe-reachable set (winning mode); once the sets overlap they steer
//! toward the projection of the attacker onto the overlap instead
//! (recovery mode). The same waypoint doubles as the optimal attacker's
//! steering reference, which is how the benchmark attacker plays.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{build_srs, ConvexRegion};
use crate::solver::{
    solve_min_distance_with, solve_projection_with, CheckCounter, SolveOptions, SolveResult,
    SolveStatus,
};
use crate::vec::Vector;
use crate::EPS_WIN;

/// One coalition-attacker pairing: positions, speed ratios, and capture
/// radii for the defenders, plus the attacker's position and speed.
#[derive(Clone, Debug)]
pub struct CoalitionView {
    pub defender_ids: Vec<usize>,
    pub defender_positions: Vec<Vector>,
    pub gammas: Vec<f64>,
    pub radii: Vec<f64>,
    pub max_speeds: Vec<f64>,
    pub attacker_id: usize,
    pub attacker_position: Vector,
    pub attacker_max_speed: f64,
}

impl CoalitionView {
    /// Builds a view, deriving each speed ratio from the defender and
    /// attacker maximum speeds. Rejects defenders slower than the attacker.
    pub fn new(
        defender_ids: Vec<usize>,
        defender_positions: Vec<Vector>,
        max_speeds: Vec<f64>,
        radii: Vec<f64>,
        attacker_id: usize,
        attacker_position: Vector,
        attacker_max_speed: f64,
    ) -> Result<Self> {
        let n = defender_ids.len();
        if defender_positions.len() != n || max_speeds.len() != n || radii.len() != n {
            return Err(Error::invalid(
                "defender ids, positions, speeds, and radii must have equal lengths",
            ));
        }
        if attacker_max_speed <= 0.0 {
            return Err(Error::invalid("attacker max speed must be positive"));
        }
        let gammas: Vec<f64> = max_speeds.iter().map(|s| s / attacker_max_speed).collect();
        for (i, g) in gammas.iter().enumerate() {
            if *g < 1.0 {
                return Err(Error::invalid(format!(
                    "defender {} is slower than the attacker (speed ratio {:.4} < 1)",
                    defender_ids[i], g
                )));
            }
        }
        Ok(CoalitionView {
            defender_ids,
            defender_positions,
            gammas,
            radii,
            max_speeds,
            attacker_id,
            attacker_position,
            attacker_max_speed,
        })
    }

    /// Safe-reachable set of the attacker against this coalition inside the
    /// domain. Frontier atoms follow the domain atoms in defender order.
    pub fn srs(&self, domain: &ConvexRegion) -> Result<ConvexRegion> {
        build_srs(
            &self.defender_positions,
            &self.attacker_position,
            &self.gammas,
            &self.radii,
            domain,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefenseMode {
    WinningMode,
    RecoveryMode,
}

/// One coordination decision: the separation value, the shared waypoint,
/// and a full-speed velocity per defender.
#[derive(Clone, Debug)]
pub struct CoordinationOutcome {
    /// Separation value, clamped to zero at the winning threshold so that
    /// `mode == WinningMode` exactly when `phi > 0`.
    pub phi: f64,
    pub waypoint: Vector,
    pub mode: DefenseMode,
    pub defender_velocities: BTreeMap<usize, Vector>,
    /// Set when the recovery projection was numerically infeasible and the
    /// outcome fell back to the winning-mode waypoint.
    pub fallback: bool,
}

/// Full solver output for one coalition-attacker pair, with enough context
/// to map constraint indices back to defenders.
#[derive(Clone, Debug)]
pub struct SingleAttackSolution {
    pub result: SolveResult,
    /// Index of the first capture-frontier atom inside the combined
    /// constraint list (equals the number of domain atoms).
    pub frontier_offset: usize,
}

impl SingleAttackSolution {
    /// Raw separation value; infeasible safe-reachable sets count as zero.
    pub fn phi_raw(&self) -> f64 {
        if self.result.status == SolveStatus::Infeasible {
            0.0
        } else {
            self.result.value
        }
    }

    pub fn feasible(&self) -> bool {
        self.phi_raw() > EPS_WIN
    }

    pub fn waypoint(&self) -> Option<Vector> {
        if self.result.status == SolveStatus::Infeasible {
            None
        } else {
            Some(self.result.primal_q)
        }
    }
}

/// Solve the separation program for one pair and keep the whole result.
/// Increments the check counter once.
pub fn single_attack_solve(
    view: &CoalitionView,
    domain: &ConvexRegion,
    target: &ConvexRegion,
    counter: &mut CheckCounter,
) -> Result<SingleAttackSolution> {
    let srs = view.srs(domain)?;
    let options = SolveOptions {
        start_a: Some(view.attacker_position),
        start_b: None,
    };
    let result = solve_min_distance_with(&srs, target, options, counter)?;
    Ok(SingleAttackSolution {
        result,
        frontier_offset: domain.atoms().len(),
    })
}

/// Separation value and its minimizing point for one pair.
pub fn single_attack_value(
    view: &CoalitionView,
    domain: &ConvexRegion,
    target: &ConvexRegion,
    counter: &mut CheckCounter,
) -> Result<(f64, Option<Vector>)> {
    let solution = single_attack_solve(view, domain, target, counter)?;
    Ok((solution.phi_raw(), solution.waypoint()))
}

/// Whether the pair currently sits inside the defense-winning region.
pub fn is_defense_winning(
    view: &CoalitionView,
    domain: &ConvexRegion,
    target: &ConvexRegion,
    counter: &mut CheckCounter,
) -> Result<bool> {
    let (phi, _) = single_attack_value(view, domain, target, counter)?;
    Ok(phi > EPS_WIN)
}

/// The almost-optimal waypoint for the current joint state: the separation
/// minimizer while the value is positive, otherwise the projection of the
/// attacker onto the overlap of the safe-reachable set and the target.
fn dual_mode_waypoint(
    view: &CoalitionView,
    domain: &ConvexRegion,
    target: &ConvexRegion,
    counter: &mut CheckCounter,
) -> Result<(f64, Vector, DefenseMode, bool)> {
    let solution = single_attack_solve(view, domain, target, counter)?;
    let raw = solution.phi_raw();
    if raw > EPS_WIN {
        return Ok((
            raw,
            solution.result.primal_q,
            DefenseMode::WinningMode,
            false,
        ));
    }
    let overlap = view.srs(domain)?.intersect(target)?;
    let projection = solve_projection_with(
        &view.attacker_position,
        &overlap,
        SolveOptions {
            start_a: Some(view.attacker_position),
            start_b: None,
        },
    )?;
    if projection.status == SolveStatus::Infeasible {
        // Numerically contradictory: the separation value says the sets
        // meet but the overlap program found nothing. Stay in winning mode
        // with the last separation point (or hold position if none exists).
        let waypoint = solution.waypoint().unwrap_or(view.attacker_position);
        return Ok((0.0, waypoint, DefenseMode::WinningMode, true));
    }
    Ok((0.0, projection.primal_q, DefenseMode::RecoveryMode, false))
}

/// Full-speed command toward a waypoint, with a dead zone so solver noise
/// around an already-reached waypoint does not turn into unit-vector
/// jitter.
fn steer(from: &Vector, to: &Vector, speed: f64) -> Vector {
    let offset = *to - *from;
    if offset.norm() <= 1e-9 {
        Vector::zeros(from.dim())
    } else {
        offset.normalized_or_zero() * speed
    }
}

/// One dual-mode coordination step: pick the waypoint for the current
/// joint state and send every defender toward it at full speed.
pub fn dmsdc_step(
    view: &CoalitionView,
    domain: &ConvexRegion,
    target: &ConvexRegion,
    counter: &mut CheckCounter,
) -> Result<CoordinationOutcome> {
    let (phi, waypoint, mode, fallback) = dual_mode_waypoint(view, domain, target, counter)?;
    let mut velocities = BTreeMap::new();
    for (k, id) in view.defender_ids.iter().enumerate() {
        velocities.insert(
            *id,
            steer(&view.defender_positions[k], &waypoint, view.max_speeds[k]),
        );
    }
    Ok(CoordinationOutcome {
        phi: if phi > EPS_WIN { phi } else { 0.0 },
        waypoint,
        mode,
        defender_velocities: velocities,
        fallback,
    })
}

/// The waypoint the attacker of this pair steers toward under the
/// dual-mode rule.
pub fn optimal_attack_waypoint(
    view: &CoalitionView,
    domain: &ConvexRegion,
    target: &ConvexRegion,
    counter: &mut CheckCounter,
) -> Result<Vector> {
    let (_, waypoint, _, _) = dual_mode_waypoint(view, domain, target, counter)?;
    Ok(waypoint)
}

/// The benchmark attacker: full speed toward the almost-optimal waypoint of
/// its own pair view.
pub fn optimal_attack_input(
    view: &CoalitionView,
    domain: &ConvexRegion,
    target: &ConvexRegion,
    counter: &mut CheckCounter,
) -> Result<Vector> {
    let waypoint = optimal_attack_waypoint(view, domain, target, counter)?;
    Ok(steer(
        &view.attacker_position,
        &waypoint,
        view.attacker_max_speed,
    ))
}

/// The naive benchmark attacker: full speed toward the nearest point of the
/// target set, ignoring the defenders.
pub fn straight_line_attack_input(
    attacker_position: &Vector,
    attacker_max_speed: f64,
    target: &ConvexRegion,
) -> Result<Vector> {
    let mut scratch = CheckCounter::new();
    let projection = crate::solver::solve_projection(attacker_position, target, &mut scratch)?;
    if projection.status == SolveStatus::Infeasible {
        return Err(Error::invalid("target set is empty"));
    }
    Ok(steer(
        attacker_position,
        &projection.primal_q,
        attacker_max_speed,
    ))
}
