//! Discrete-time game loop: single-integrator dynamics, capture and goal
//! detection, allocation cadence, payoff accounting, and trace recording.
//!
//! Control runs every `dt`; the allocation layer reruns every
//! `allocation_period` (both seconds). Attackers that are captured or reach
//! the target freeze in place and leave the active set; the game ends when
//! no active attacker remains or the clock passes `t_max`.

use std::collections::BTreeMap;
use std::io::Write as IoWrite;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::allocation::{
    hilp, mdea, AllocationState, Coalition, CoalitionAssignment, MdeaContext,
};
use crate::coordination::{dmsdc_step, optimal_attack_waypoint, straight_line_attack_input};
use crate::error::{Error, Result};
use crate::geometry::{project_to_domain, ConvexRegion};
use crate::solver::{solve_projection, CheckCounter, SolveStatus};
use crate::vec::Vector;

#[derive(Clone, Debug, Serialize)]
pub struct DefenderSpec {
    pub position: Vector,
    pub max_speed: f64,
    pub capture_radius: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackerSpec {
    pub position: Vector,
    pub max_speed: f64,
}

/// Full description of one game instance.
#[derive(Clone, Debug, Serialize)]
pub struct ScenarioConfig {
    pub dimension: usize,
    pub domain: ConvexRegion,
    pub target: ConvexRegion,
    pub defenders: Vec<DefenderSpec>,
    pub attackers: Vec<AttackerSpec>,
    /// Control step, seconds.
    pub dt: f64,
    /// Allocation step, seconds; at least `dt`.
    pub allocation_period: f64,
    /// Wall-clock cap on the game, seconds.
    pub t_max: f64,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// Check every structural invariant: dimensions, time constants, speed
    /// ratios, containment of the initial positions, a clean start for
    /// every attacker, and (by sampled projections) that the target lies
    /// inside the domain.
    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        if n < 2 || n > 3 {
            return Err(Error::config(format!("dimension must be 2 or 3, got {n}")));
        }
        if self.domain.dim() != n || self.target.dim() != n {
            return Err(Error::config(
                "domain and target dimensions must match the scenario dimension",
            ));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("dt must be positive"));
        }
        if self.allocation_period < self.dt {
            return Err(Error::config("allocation_period must be at least dt"));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::config("t_max must be positive"));
        }
        if self.attackers.is_empty() && self.defenders.is_empty() {
            return Err(Error::config("scenario has no agents"));
        }
        let max_attacker_speed = self
            .attackers
            .iter()
            .map(|a| a.max_speed)
            .fold(0.0f64, f64::max);
        for (i, d) in self.defenders.iter().enumerate() {
            d.position.check_dim(n)?;
            if d.max_speed <= 0.0 {
                return Err(Error::config(format!("defender {i} needs positive speed")));
            }
            if d.capture_radius < 0.0 {
                return Err(Error::config(format!(
                    "defender {i} has negative capture radius"
                )));
            }
            if !self.attackers.is_empty() && d.max_speed < max_attacker_speed {
                return Err(Error::config(format!(
                    "defender {i} is slower than the fastest attacker \
                     ({} < {max_attacker_speed}); speed ratios must be at least 1",
                    d.max_speed
                )));
            }
            if !self.domain.contains(&d.position, 1e-9)? {
                return Err(Error::config(format!(
                    "defender {i} starts outside the domain"
                )));
            }
        }
        for (j, a) in self.attackers.iter().enumerate() {
            a.position.check_dim(n)?;
            if a.max_speed <= 0.0 {
                return Err(Error::config(format!("attacker {j} needs positive speed")));
            }
            if !self.domain.contains(&a.position, 1e-9)? {
                return Err(Error::config(format!(
                    "attacker {j} starts outside the domain"
                )));
            }
            // Clean start: not already captured, not already inside.
            for (i, d) in self.defenders.iter().enumerate() {
                if a.position.distance(&d.position) < d.capture_radius {
                    return Err(Error::config(format!(
                        "attacker {j} starts inside the capture region of defender {i}"
                    )));
                }
            }
            if self.target.contains(&a.position, 0.0)? {
                return Err(Error::config(format!(
                    "attacker {j} starts inside the target set"
                )));
            }
        }
        self.check_target_inside_domain()?;
        Ok(())
    }

    /// Sampled containment check: project seeded random probes onto the
    /// target (each projection lies in the target by construction) and
    /// require every projected point to sit inside the domain.
    fn check_target_inside_domain(&self) -> Result<()> {
        let mut rng = ChaCha20Rng::seed_from_u64(self.rng_seed ^ 0x7461_7267_6574);
        let mut scratch = CheckCounter::new();
        for probe in 0..64 {
            let mut q = Vector::zeros(self.dimension);
            for k in 0..self.dimension {
                q[k] = rng.gen_range(-10.0..10.0);
            }
            let projection = solve_projection(&q, &self.target, &mut scratch)?;
            if projection.status == SolveStatus::Infeasible {
                return Err(Error::config("target set is empty"));
            }
            if projection.status != SolveStatus::Optimal {
                continue;
            }
            if !self.domain.contains(&projection.primal_q, 1e-6)? {
                return Err(Error::config(format!(
                    "target point {:?} lies outside the domain (probe {probe})",
                    projection.primal_q
                )));
            }
        }
        Ok(())
    }

    pub fn max_steps(&self) -> usize {
        (self.t_max / self.dt).ceil() as usize
    }

    pub fn steps_per_allocation(&self) -> usize {
        ((self.allocation_period / self.dt).round() as usize).max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AttackerStatus {
    Active,
    Captured,
    ReachedTarget,
}

/// Positions and statuses of every agent at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    pub time: f64,
    pub defender_positions: Vec<Vector>,
    pub attacker_positions: Vec<Vector>,
    pub attacker_status: Vec<AttackerStatus>,
}

impl JointState {
    pub fn initial(config: &ScenarioConfig) -> Self {
        JointState {
            time: 0.0,
            defender_positions: config.defenders.iter().map(|d| d.position).collect(),
            attacker_positions: config.attackers.iter().map(|a| a.position).collect(),
            attacker_status: vec![AttackerStatus::Active; config.attackers.len()],
        }
    }

    pub fn active_count(&self) -> usize {
        self.count(AttackerStatus::Active)
    }

    pub fn captured_count(&self) -> usize {
        self.count(AttackerStatus::Captured)
    }

    pub fn reached_count(&self) -> usize {
        self.count(AttackerStatus::ReachedTarget)
    }

    fn count(&self, status: AttackerStatus) -> usize {
        self.attacker_status.iter().filter(|s| **s == status).count()
    }

    /// Snapshot in the shape the allocation layer consumes.
    pub fn allocation_state(&self, config: &ScenarioConfig) -> AllocationState {
        AllocationState {
            defender_positions: self.defender_positions.clone(),
            defender_speeds: config.defenders.iter().map(|d| d.max_speed).collect(),
            capture_radii: config.defenders.iter().map(|d| d.capture_radius).collect(),
            attacker_positions: self.attacker_positions.clone(),
            attacker_speeds: config.attackers.iter().map(|a| a.max_speed).collect(),
            active: self
                .attacker_status
                .iter()
                .map(|s| *s == AttackerStatus::Active)
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DefensePolicy {
    /// Rerun the hierarchical allocation with the monotonic update at
    /// every allocation time.
    Mdea,
    /// Allocate once at the initial state and keep that assignment.
    InitialOnly,
    /// No defense at all; defenders hold position.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AttackPolicy {
    /// Steer toward the almost-optimal waypoint against the full defender
    /// team.
    Optimal,
    /// Steer toward the nearest target point, ignoring defenders.
    StraightLine,
    /// Velocity drawn uniformly from the admissible ball each step.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TerminationReason {
    AllResolved,
    Timeout,
}

/// One allocation event along a game.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AllocationRecord {
    pub time: f64,
    /// Objective value of the adopted (pre-completion) assignment.
    pub gamma: u64,
    /// Captured attackers up to this allocation time.
    pub captured_so_far: u64,
    /// Active attackers at this allocation time.
    pub active_count: u64,
    /// Minimum-distance solves spent by this allocation update.
    pub check_count: u64,
    /// Largest active-defense set the hierarchical pass saw.
    pub max_ads_size: u64,
    pub adopted: bool,
    pub assignment: CoalitionAssignment,
}

/// Full record of one simulated game.
#[derive(Clone, Debug, PartialEq)]
pub struct GameTrace {
    pub states: Vec<JointState>,
    pub allocations: Vec<AllocationRecord>,
    /// Per step, the separation value of every coalition-attacker pair the
    /// defense played that step.
    pub phi_by_step: Vec<Vec<(usize, f64)>>,
    pub payoff: u64,
    pub captured: u64,
    pub reached: u64,
    pub timed_out_active: u64,
    pub termination: TerminationReason,
    pub allocation_checks: u64,
    pub control_checks: u64,
    pub attacker_checks: u64,
}

/// Count of attackers that reached the target by the end of the trace.
pub fn payoff(trace: &GameTrace) -> u64 {
    trace.payoff
}

/// Forward-Euler update of every agent with domain projection; statuses
/// are untouched (they change in [`update_status`]). Velocities must
/// respect each agent's speed limit, and inactive attackers must receive
/// exactly zero velocity.
pub fn step(
    state: &JointState,
    defender_velocities: &BTreeMap<usize, Vector>,
    attacker_velocities: &[Vector],
    config: &ScenarioConfig,
) -> Result<JointState> {
    if attacker_velocities.len() != state.attacker_positions.len() {
        return Err(Error::invalid("one velocity per attacker required"));
    }
    let dt = config.dt;
    let mut next = state.clone();
    next.time = state.time + dt;
    for (i, p) in next.defender_positions.iter_mut().enumerate() {
        let v = defender_velocities
            .get(&i)
            .copied()
            .unwrap_or(Vector::zeros(config.dimension));
        if v.norm() > config.defenders[i].max_speed + 1e-9 {
            return Err(Error::invalid(format!(
                "defender {i} velocity exceeds its speed limit"
            )));
        }
        *p = project_to_domain(&config.domain, &(*p + v * dt))?;
    }
    for (j, p) in next.attacker_positions.iter_mut().enumerate() {
        let v = attacker_velocities[j];
        if state.attacker_status[j] != AttackerStatus::Active {
            if v.norm() != 0.0 {
                return Err(Error::invalid(format!(
                    "inactive attacker {j} must receive zero velocity"
                )));
            }
            continue;
        }
        if v.norm() > config.attackers[j].max_speed + 1e-9 {
            return Err(Error::invalid(format!(
                "attacker {j} velocity exceeds its speed limit"
            )));
        }
        *p = project_to_domain(&config.domain, &(*p + v * dt))?;
    }
    Ok(next)
}

/// Status transition pass at a step boundary. Capture uses a strict radius
/// comparison and is checked before target entry when both hold at the
/// same instant.
pub fn update_status(state: &JointState, config: &ScenarioConfig) -> Result<JointState> {
    let mut next = state.clone();
    for j in 0..next.attacker_positions.len() {
        if next.attacker_status[j] != AttackerStatus::Active {
            continue;
        }
        let p = next.attacker_positions[j];
        let captured = config
            .defenders
            .iter()
            .zip(&next.defender_positions)
            .any(|(spec, dp)| p.distance(dp) < spec.capture_radius);
        if captured {
            next.attacker_status[j] = AttackerStatus::Captured;
        } else if config.target.contains(&p, 0.0)? {
            next.attacker_status[j] = AttackerStatus::ReachedTarget;
        }
    }
    Ok(next)
}

/// Status transition pass for one simulation step, ordering same-step
/// entry and capture events at the interpolated entry instant.
///
/// A step that ends inside both the target and a capture disk is
/// ambiguous at the boundary: the continuous trajectory reached the
/// target surface strictly before the capture condition (which is a
/// strict inequality) whenever the entry point still had nonnegative
/// clearance. Deciding such steps at the end state alone hands every
/// exact-tie arrival to the defense and measurably distorts the losing-
/// start statistics, so entry is located on the step segment by bisection
/// and capture is evaluated at that instant with linearly interpolated
/// defender positions. Everything else keeps the boundary-only semantics
/// of [`update_status`].
pub fn update_status_along_step(
    previous: &JointState,
    state: &JointState,
    config: &ScenarioConfig,
) -> Result<JointState> {
    let mut next = state.clone();
    for j in 0..next.attacker_positions.len() {
        if next.attacker_status[j] != AttackerStatus::Active {
            continue;
        }
        let p1 = next.attacker_positions[j];
        let entered = config.target.contains(&p1, 0.0)?;
        if !entered {
            // No entry this step: boundary capture check only.
            let captured = config
                .defenders
                .iter()
                .zip(&next.defender_positions)
                .any(|(spec, dp)| p1.distance(dp) < spec.capture_radius);
            if captured {
                next.attacker_status[j] = AttackerStatus::Captured;
            }
            continue;
        }
        let p0 = previous.attacker_positions[j];
        // Earliest crossing of the target surface along the segment; the
        // inside set is a trailing interval of [0, 1] by convexity.
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        if config.target.contains(&p0, 0.0)? {
            hi = 0.0;
        } else {
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if config.target.contains(&(p0 + (p1 - p0) * mid), 0.0)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        let tau = hi;
        let entry_point = p0 + (p1 - p0) * tau;
        let captured_at_entry = config
            .defenders
            .iter()
            .enumerate()
            .any(|(i, spec)| {
                let d0 = previous.defender_positions[i];
                let d1 = next.defender_positions[i];
                let d_at = d0 + (d1 - d0) * tau;
                entry_point.distance(&d_at) < spec.capture_radius
            });
        next.attacker_status[j] = if captured_at_entry {
            AttackerStatus::Captured
        } else {
            AttackerStatus::ReachedTarget
        };
    }
    Ok(next)
}

/// Velocity drawn uniformly from the closed speed ball.
fn random_admissible_velocity(rng: &mut ChaCha20Rng, dim: usize, max_speed: f64) -> Vector {
    loop {
        let mut v = Vector::zeros(dim);
        for k in 0..dim {
            v[k] = rng.gen_range(-1.0..1.0);
        }
        if v.norm_squared() <= 1.0 {
            return v * max_speed;
        }
    }
}

/// Run one full game under the given defense and attack policies.
pub fn run_game(
    config: &ScenarioConfig,
    defense: DefensePolicy,
    attack: AttackPolicy,
) -> Result<GameTrace> {
    config.validate()?;
    let domain = &config.domain;
    let target = &config.target;
    let n_defenders = config.defenders.len();
    let m_attackers = config.attackers.len();
    let mut rng = ChaCha20Rng::seed_from_u64(config.rng_seed);

    let mut alloc_counter = CheckCounter::new();
    let mut control_counter = CheckCounter::new();
    let mut attack_counter = CheckCounter::new();

    let mut state = update_status(&JointState::initial(config), config)?;
    let mut states = vec![state.clone()];
    let mut allocations: Vec<AllocationRecord> = Vec::new();
    let mut phi_by_step: Vec<Vec<(usize, f64)>> = Vec::new();

    let mut assignment = CoalitionAssignment::empty();
    let mut mdea_context: Option<MdeaContext> = None;
    let full_coalition = if n_defenders > 0 {
        Some(Coalition::new(0..n_defenders)?)
    } else {
        None
    };

    let steps_per_allocation = config.steps_per_allocation();
    let max_steps = config.max_steps();
    let mut termination = TerminationReason::Timeout;

    for step_idx in 0..max_steps {
        if state.active_count() == 0 {
            termination = TerminationReason::AllResolved;
            break;
        }
        let alloc_state = state.allocation_state(config);

        let allocate_now = step_idx % steps_per_allocation == 0
            && match defense {
                DefensePolicy::Mdea => true,
                DefensePolicy::InitialOnly => step_idx == 0,
                DefensePolicy::None => step_idx == 0,
            };
        if allocate_now {
            let before = alloc_counter.count();
            match defense {
                DefensePolicy::None => {
                    allocations.push(AllocationRecord {
                        time: state.time,
                        gamma: 0,
                        captured_so_far: state.captured_count() as u64,
                        active_count: state.active_count() as u64,
                        check_count: 0,
                        max_ads_size: 0,
                        adopted: false,
                        assignment: CoalitionAssignment::empty(),
                    });
                }
                DefensePolicy::Mdea | DefensePolicy::InitialOnly => {
                    let outcome = hilp(&alloc_state, domain, target, &mut alloc_counter)?;
                    let context = mdea_context.get_or_insert_with(|| {
                        MdeaContext::initial(&outcome.assignment, m_attackers)
                    });
                    let (next_assignment, record) =
                        mdea(&alloc_state, &outcome.assignment, context)?;
                    assignment = next_assignment;
                    allocations.push(AllocationRecord {
                        time: state.time,
                        gamma: record.gamma,
                        captured_so_far: state.captured_count() as u64,
                        active_count: state.active_count() as u64,
                        check_count: alloc_counter.count() - before,
                        max_ads_size: outcome.max_ads_size as u64,
                        adopted: record.adopted,
                        assignment: assignment.clone(),
                    });
                }
            }
        }

        // Defense control: one coordination step per assigned pair whose
        // attacker is still active. Pairs that cover the whole defender
        // team also serve the optimal attacker's waypoint via the memo.
        let mut defender_velocities: BTreeMap<usize, Vector> = (0..n_defenders)
            .map(|d| (d, Vector::zeros(config.dimension)))
            .collect();
        let mut step_phis: Vec<(usize, f64)> = Vec::new();
        let mut waypoint_memo: BTreeMap<usize, Vector> = BTreeMap::new();
        for (attacker, coalition) in assignment.pairs() {
            if state.attacker_status[*attacker] != AttackerStatus::Active {
                continue;
            }
            let view = alloc_state.view(coalition, *attacker)?;
            let outcome = dmsdc_step(&view, domain, target, &mut control_counter)?;
            step_phis.push((*attacker, outcome.phi));
            if Some(coalition) == full_coalition.as_ref() {
                waypoint_memo.insert(*attacker, outcome.waypoint);
            }
            for (id, v) in outcome.defender_velocities {
                defender_velocities.insert(id, v);
            }
        }
        phi_by_step.push(step_phis);

        // Attacker control.
        let mut attacker_velocities = Vec::with_capacity(m_attackers);
        for j in 0..m_attackers {
            if state.attacker_status[j] != AttackerStatus::Active {
                attacker_velocities.push(Vector::zeros(config.dimension));
                continue;
            }
            let spec = &config.attackers[j];
            let v = match attack {
                AttackPolicy::StraightLine => {
                    straight_line_attack_input(&state.attacker_positions[j], spec.max_speed, target)?
                }
                AttackPolicy::Random => {
                    random_admissible_velocity(&mut rng, config.dimension, spec.max_speed)
                }
                AttackPolicy::Optimal => {
                    if let Some(waypoint) = waypoint_memo.get(&j) {
                        let offset = *waypoint - state.attacker_positions[j];
                        if offset.norm() <= 1e-9 {
                            Vector::zeros(config.dimension)
                        } else {
                            offset.normalized_or_zero() * spec.max_speed
                        }
                    } else if let Some(full) = &full_coalition {
                        let view = alloc_state.view(full, j)?;
                        let waypoint =
                            optimal_attack_waypoint(&view, domain, target, &mut attack_counter)?;
                        let offset = waypoint - state.attacker_positions[j];
                        if offset.norm() <= 1e-9 {
                            Vector::zeros(config.dimension)
                        } else {
                            offset.normalized_or_zero() * spec.max_speed
                        }
                    } else {
                        straight_line_attack_input(
                            &state.attacker_positions[j],
                            spec.max_speed,
                            target,
                        )?
                    }
                }
            };
            attacker_velocities.push(v);
        }

        let moved = step(&state, &defender_velocities, &attacker_velocities, config)?;
        state = update_status_along_step(&state, &moved, config)?;
        states.push(state.clone());
    }
    if state.active_count() == 0 {
        termination = TerminationReason::AllResolved;
    }

    Ok(GameTrace {
        payoff: state.reached_count() as u64,
        captured: state.captured_count() as u64,
        reached: state.reached_count() as u64,
        timed_out_active: state.active_count() as u64,
        termination,
        allocation_checks: alloc_counter.count(),
        control_checks: control_counter.count(),
        attacker_checks: attack_counter.count(),
        states,
        allocations,
        phi_by_step,
    })
}

// ---------------------------------------------------------------------------
// Trace export
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct AllocationSummary {
    pub t: f64,
    pub gamma: u64,
    pub n_c: u64,
    pub check_count: u64,
    pub adopted: bool,
    pub pairs: CoalitionAssignment,
}

/// JSON-facing digest of one game.
#[derive(Clone, Debug, Serialize)]
pub struct GameSummary {
    pub payoff: u64,
    pub captured: u64,
    pub reached: u64,
    pub timed_out_active: u64,
    pub termination_reason: TerminationReason,
    /// Payoff bound implied by the initial allocation: attackers minus the
    /// initial objective value minus initially captured attackers.
    pub payoff_bound: u64,
    pub allocation_checks: u64,
    pub control_checks: u64,
    pub attacker_checks: u64,
    pub allocations: Vec<AllocationSummary>,
}

pub fn summarize(trace: &GameTrace, config: &ScenarioConfig) -> GameSummary {
    let m = config.attackers.len() as u64;
    let initial = trace.allocations.first();
    let bound = m
        - initial.map(|a| a.gamma).unwrap_or(0)
        - initial.map(|a| a.captured_so_far).unwrap_or(0);
    GameSummary {
        payoff: trace.payoff,
        captured: trace.captured,
        reached: trace.reached,
        timed_out_active: trace.timed_out_active,
        termination_reason: trace.termination,
        payoff_bound: bound,
        allocation_checks: trace.allocation_checks,
        control_checks: trace.control_checks,
        attacker_checks: trace.attacker_checks,
        allocations: trace
            .allocations
            .iter()
            .map(|a| AllocationSummary {
                t: a.time,
                gamma: a.gamma,
                n_c: a.captured_so_far,
                check_count: a.check_count,
                adopted: a.adopted,
                pairs: a.assignment.clone(),
            })
            .collect(),
    }
}

/// One CSV row per agent per recorded step:
/// `t,agent_id,kind,x,y[,z],status`.
pub fn write_trace_csv(trace: &GameTrace, config: &ScenarioConfig, out: &mut dyn IoWrite) -> Result<()> {
    if config.dimension == 3 {
        writeln!(out, "t,agent_id,kind,x,y,z,status")?;
    } else {
        writeln!(out, "t,agent_id,kind,x,y,status")?;
    }
    let coords = |p: &Vector| -> String {
        p.as_slice()
            .iter()
            .map(|c| format!("{c}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    for state in &trace.states {
        for (i, p) in state.defender_positions.iter().enumerate() {
            writeln!(out, "{},{},defender,{},active", state.time, i, coords(p))?;
        }
        for (j, p) in state.attacker_positions.iter().enumerate() {
            let status = match state.attacker_status[j] {
                AttackerStatus::Active => "active",
                AttackerStatus::Captured => "captured",
                AttackerStatus::ReachedTarget => "reached",
            };
            writeln!(out, "{},{},attacker,{},{}", state.time, j, coords(p), status)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_domain(half: f64) -> ConvexRegion {
        ConvexRegion::bounding_box(&Vector::new2(-half, -half), &Vector::new2(half, half)).unwrap()
    }

    fn config_1v1(defender: (f64, f64), attacker: (f64, f64), radius: f64) -> ScenarioConfig {
        ScenarioConfig {
            dimension: 2,
            domain: box_domain(5.0),
            target: ConvexRegion::ball(Vector::new2(0.0, 3.0), 1.0),
            defenders: vec![DefenderSpec {
                position: Vector::new2(defender.0, defender.1),
                max_speed: 1.0,
                capture_radius: radius,
            }],
            attackers: vec![AttackerSpec {
                position: Vector::new2(attacker.0, attacker.1),
                max_speed: 1.0,
            }],
            dt: 0.01,
            allocation_period: 0.1,
            t_max: 30.0,
            rng_seed: 7,
        }
    }

    #[test]
    fn step_basic_cases() {
        let config = config_1v1((0.0, 0.0), (4.0, 4.0), 0.3);
        let state = JointState::initial(&config);

        // Zero velocities keep everything in place.
        let zeros: BTreeMap<usize, Vector> = BTreeMap::new();
        let next = step(&state, &zeros, &[Vector::zeros(2)], &config).unwrap();
        assert_eq!(next.defender_positions, state.defender_positions);
        assert_eq!(next.attacker_positions, state.attacker_positions);
        assert!((next.time - 0.01).abs() < 1e-12);

        // Forward-Euler displacement.
        let mut v = BTreeMap::new();
        v.insert(0, Vector::new2(1.0, 0.0));
        let next = step(&state, &v, &[Vector::zeros(2)], &config).unwrap();
        assert!(next.defender_positions[0].distance(&Vector::new2(0.01, 0.0)) < 1e-12);

        // Domain clamp at the wall.
        let mut near_wall = state.clone();
        near_wall.attacker_positions[0] = Vector::new2(4.995, 0.0);
        let next = step(
            &near_wall,
            &zeros,
            &[Vector::new2(1.0, 0.0)],
            &config,
        )
        .unwrap();
        assert_eq!(next.attacker_positions[0], Vector::new2(5.0, 0.0));

        // Speed violations are rejected.
        let mut fast = BTreeMap::new();
        fast.insert(0, Vector::new2(2.0, 0.0));
        assert!(step(&state, &fast, &[Vector::zeros(2)], &config).is_err());

        // Inactive attackers must be commanded zero.
        let mut frozen = state.clone();
        frozen.attacker_status[0] = AttackerStatus::Captured;
        assert!(step(&frozen, &zeros, &[Vector::new2(0.1, 0.0)], &config).is_err());
    }

    #[test]
    fn status_updates_use_strict_capture_and_priority() {
        let mut config = config_1v1((0.0, 0.0), (1.0, 0.0), 1.0);
        config.target = ConvexRegion::ball(Vector::new2(2.0, 0.0), 1.5);
        let state = JointState::initial(&config);

        // Exactly on the capture radius: still active (strict inequality),
        // but inside the target, so the attacker scores.
        let updated = update_status(&state, &config).unwrap();
        assert_eq!(updated.attacker_status[0], AttackerStatus::ReachedTarget);

        // Strictly inside the capture radius and inside the target at the
        // same time: capture wins.
        let mut both = JointState::initial(&config);
        both.attacker_positions[0] = Vector::new2(0.9, 0.0);
        let updated = update_status(&both, &config).unwrap();
        assert_eq!(updated.attacker_status[0], AttackerStatus::Captured);

        // Comfortably inside the capture region only.
        let mut near = JointState::initial(&config);
        near.attacker_positions[0] = Vector::new2(0.5, 0.0);
        near.defender_positions[0] = Vector::new2(0.0, 0.0);
        let mut cfg = config.clone();
        cfg.target = ConvexRegion::ball(Vector::new2(-3.0, -3.0), 0.5);
        let updated = update_status(&near, &cfg).unwrap();
        assert_eq!(updated.attacker_status[0], AttackerStatus::Captured);
    }

    #[test]
    fn game_with_no_attackers_ends_immediately() {
        let mut config = config_1v1((0.0, 0.0), (4.0, 4.0), 0.3);
        config.attackers.clear();
        let trace = run_game(&config, DefensePolicy::Mdea, AttackPolicy::Optimal).unwrap();
        assert_eq!(trace.payoff, 0);
        assert_eq!(trace.termination, TerminationReason::AllResolved);
        assert_eq!(trace.states.len(), 1);
    }

    #[test]
    fn winning_start_never_concedes_entry() {
        // Defender between attacker and target with a healthy margin.
        let config = config_1v1((0.0, 1.0), (0.0, -3.5), 0.4);
        let trace = run_game(&config, DefensePolicy::Mdea, AttackPolicy::Optimal).unwrap();
        assert_eq!(trace.payoff, 0, "attacker reached the target");
        // The separation value never drops measurably between steps.
        let mut prev: Option<f64> = None;
        for phis in &trace.phi_by_step {
            if let Some((_, phi)) = phis.first() {
                if let Some(p) = prev {
                    assert!(*phi >= p - 1e-2, "phi fell from {p} to {phi}");
                }
                prev = Some(*phi);
            }
        }
    }

    #[test]
    fn undefended_straight_line_attacker_scores() {
        let mut config = config_1v1((-4.8, -4.8), (0.0, -1.0), 0.2);
        config.t_max = 20.0;
        let trace = run_game(&config, DefensePolicy::None, AttackPolicy::StraightLine).unwrap();
        assert_eq!(trace.payoff, 1);
        assert_eq!(trace.captured, 0);
        assert_eq!(payoff(&trace), 1);
    }

    #[test]
    fn conservation_and_freezing_hold_along_traces() {
        let mut config = config_1v1((0.0, 1.0), (0.0, -3.0), 0.5);
        config.attackers.push(AttackerSpec {
            position: Vector::new2(3.0, -3.0),
            max_speed: 1.0,
        });
        config.defenders.push(DefenderSpec {
            position: Vector::new2(3.0, 1.0),
            max_speed: 1.2,
            capture_radius: 0.5,
        });
        let trace = run_game(&config, DefensePolicy::Mdea, AttackPolicy::Optimal).unwrap();
        let m = config.attackers.len();
        let mut frozen_at: Vec<Option<Vector>> = vec![None; m];
        for state in &trace.states {
            assert_eq!(
                state.active_count() + state.captured_count() + state.reached_count(),
                m
            );
            for j in 0..m {
                if state.attacker_status[j] != AttackerStatus::Active {
                    match frozen_at[j] {
                        None => frozen_at[j] = Some(state.attacker_positions[j]),
                        Some(p) => assert_eq!(state.attacker_positions[j], p),
                    }
                }
            }
        }
        // Both attackers face dedicated defenders with positive margins.
        assert_eq!(trace.payoff, 0);
    }

    #[test]
    fn theorem_bound_and_monotone_objective_hold() {
        let mut config = config_1v1((0.0, 1.0), (0.0, -3.0), 0.5);
        config.attackers.push(AttackerSpec {
            position: Vector::new2(4.0, -4.0),
            max_speed: 1.0,
        });
        config.defenders.push(DefenderSpec {
            position: Vector::new2(-2.0, 1.0),
            max_speed: 1.3,
            capture_radius: 0.4,
        });
        config.t_max = 40.0;
        let trace = run_game(&config, DefensePolicy::Mdea, AttackPolicy::StraightLine).unwrap();
        let m = config.attackers.len() as u64;
        let initial = &trace.allocations[0];
        assert!(trace.payoff <= m - initial.gamma - initial.captured_so_far);
        let mut prev = None;
        for record in &trace.allocations {
            let value = record.gamma + record.captured_so_far;
            if let Some(p) = prev {
                assert!(value >= p, "gamma + captures dropped from {p} to {value}");
            }
            prev = Some(value);
        }
    }

    #[test]
    fn identical_seeds_reproduce_traces() {
        let config = config_1v1((0.5, 1.0), (0.2, -3.0), 0.4);
        let a = run_game(&config, DefensePolicy::Mdea, AttackPolicy::Random).unwrap();
        let b = run_game(&config, DefensePolicy::Mdea, AttackPolicy::Random).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn summary_and_csv_are_well_formed() {
        let config = config_1v1((0.0, 1.0), (0.0, -3.0), 0.5);
        let trace = run_game(&config, DefensePolicy::Mdea, AttackPolicy::Optimal).unwrap();
        let summary = summarize(&trace, &config);
        assert_eq!(summary.payoff, trace.payoff);
        assert!(!summary.allocations.is_empty());
        let text = serde_json::to_string_pretty(&summary).unwrap();
        assert!(text.contains("payoff_bound"));

        let mut csv = Vec::new();
        write_trace_csv(&trace, &config, &mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,agent_id,kind,x,y,status");
        assert!(csv.lines().count() > 10);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        // Attacker faster than a defender.
        let mut config = config_1v1((0.0, 1.0), (0.0, -3.0), 0.5);
        config.attackers[0].max_speed = 1.5;
        assert!(config.validate().is_err());

        // Attacker starting inside the target.
        let mut config = config_1v1((0.0, 1.0), (0.0, 3.0), 0.5);
        config.target = ConvexRegion::ball(Vector::new2(0.0, 3.0), 1.0);
        assert!(config.validate().is_err());

        // Attacker starting inside a capture region.
        let config = config_1v1((0.0, 1.0), (0.0, 1.2), 0.5);
        assert!(config.validate().is_err());

        // Target escaping the domain.
        let mut config = config_1v1((0.0, 1.0), (0.0, -3.0), 0.5);
        config.target = ConvexRegion::ball(Vector::new2(5.5, 0.0), 1.0);
        assert!(config.validate().is_err());

        // Allocation period below dt.
        let mut config = config_1v1((0.0, 1.0), (0.0, -3.0), 0.5);
        config.allocation_period = 0.001;
        assert!(config.validate().is_err());
    }
}
