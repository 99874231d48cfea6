//! Coalition-to-attacker defense allocation.
//!
//! The allocation layer assigns disjoint defender coalitions to active
//! attackers so that the number of attackers facing a winning coalition is
//! as large as possible. It has four pieces:
//!
//! - an exact branch-and-bound assignment solver over candidate pairs,
//! - extraction of the active-defense set (the defenders whose capture
//!   frontiers bind at the separation waypoint),
//! - enumeration of irreducible sub-pairs (feasible coalitions none of
//!   whose proper subsets are feasible),
//! - the hierarchical heuristic that combines them, plus the monotonic
//!   update rule that only swaps assignments in when they strictly improve
//!   the expected number of stopped attackers.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::coordination::{
    dmsdc_step, single_attack_solve, CoalitionView, SingleAttackSolution,
};
use crate::error::{Error, Result};
use crate::geometry::ConvexRegion;
use crate::solver::CheckCounter;
use crate::vec::Vector;
use crate::EPS_ACTIVE;

/// A nonempty set of defender indices acting together against one attacker.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Coalition(BTreeSet<usize>);

impl Coalition {
    pub fn new(ids: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = ids.into_iter().collect();
        if set.is_empty() {
            return Err(Error::invalid("a coalition must contain a defender"));
        }
        Ok(Coalition(set))
    }

    pub fn singleton(id: usize) -> Self {
        Coalition(BTreeSet::from([id]))
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.contains(&id)
    }

    pub fn is_disjoint(&self, other: &Coalition) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn insert(&mut self, id: usize) {
        self.0.insert(id);
    }

    /// True when `other` is a proper subset of this coalition.
    pub fn is_proper_superset(&self, other: &Coalition) -> bool {
        other.0.len() < self.0.len() && other.0.is_subset(&self.0)
    }
}

/// Sparse conflict-free, redundancy-free assignment of attackers to
/// coalitions. Conflict-free: coalitions of distinct attackers are
/// disjoint. Redundancy-free: each attacker keys at most one coalition.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CoalitionAssignment {
    pairs: BTreeMap<usize, Coalition>,
}

impl CoalitionAssignment {
    pub fn empty() -> Self {
        CoalitionAssignment {
            pairs: BTreeMap::new(),
        }
    }

    pub fn pairs(&self) -> &BTreeMap<usize, Coalition> {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn coalition_of(&self, attacker: usize) -> Option<&Coalition> {
        self.pairs.get(&attacker)
    }

    pub fn assigned_defenders(&self) -> BTreeSet<usize> {
        self.pairs
            .values()
            .flat_map(|c| c.ids())
            .collect()
    }

    /// Insert a pair, enforcing both structural constraints.
    pub fn insert(&mut self, attacker: usize, coalition: Coalition) -> Result<()> {
        if self.pairs.contains_key(&attacker) {
            return Err(Error::invalid(format!(
                "attacker {attacker} is already assigned"
            )));
        }
        for (other, c) in &self.pairs {
            if !c.is_disjoint(&coalition) {
                return Err(Error::invalid(format!(
                    "coalition for attacker {attacker} shares defenders with attacker {other}"
                )));
            }
        }
        self.pairs.insert(attacker, coalition);
        Ok(())
    }

    /// Grow the coalition of `attacker`, creating it if absent; the added
    /// defender must not serve anyone else.
    fn add_defender(&mut self, attacker: usize, defender: usize) -> Result<()> {
        for (other, c) in &self.pairs {
            if *other != attacker && c.contains(defender) {
                return Err(Error::invalid(format!(
                    "defender {defender} already serves attacker {other}"
                )));
            }
        }
        match self.pairs.get_mut(&attacker) {
            Some(c) => c.insert(defender),
            None => {
                self.pairs.insert(attacker, Coalition::singleton(defender));
            }
        }
        Ok(())
    }

    /// Drop pairs whose attacker is not in the active set.
    pub fn retain_attackers(&mut self, active: &BTreeSet<usize>) {
        self.pairs.retain(|j, _| active.contains(j));
    }

    pub fn merge(&mut self, other: CoalitionAssignment) -> Result<()> {
        for (attacker, coalition) in other.pairs {
            self.insert(attacker, coalition)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let pairs: Vec<_> = self.pairs.iter().collect();
        for (i, (_, ci)) in pairs.iter().enumerate() {
            for (_, cj) in pairs.iter().skip(i + 1) {
                if !ci.is_disjoint(cj) {
                    return Err(Error::Internal(
                        "assignment violates the conflict-free constraint".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Ordering key: the sorted (attacker, coalition) tuples. Used for the
    /// deterministic lexicographic tie-break of the exact solver.
    #[cfg(test)]
    fn key(&self) -> Vec<(usize, Vec<usize>)> {
        self.pairs
            .iter()
            .map(|(j, c)| (*j, c.ids().collect()))
            .collect()
    }
}

/// One candidate coalition-attacker pair with its predicted outcome.
#[derive(Clone, Debug)]
pub struct PairEvaluation {
    pub coalition: Coalition,
    pub attacker_id: usize,
    /// 1 when the attacker is active and the pair is feasible, else 0.
    pub reward: u64,
    pub phi: f64,
    pub waypoint: Vector,
    pub ads: Option<Coalition>,
}

/// Positions, speeds, radii, and liveness for the whole team pair; the
/// joint-state snapshot the allocation layer works from.
#[derive(Clone, Debug)]
pub struct AllocationState {
    pub defender_positions: Vec<Vector>,
    pub defender_speeds: Vec<f64>,
    pub capture_radii: Vec<f64>,
    pub attacker_positions: Vec<Vector>,
    pub attacker_speeds: Vec<f64>,
    pub active: Vec<bool>,
}

impl AllocationState {
    pub fn defender_count(&self) -> usize {
        self.defender_positions.len()
    }

    pub fn attacker_count(&self) -> usize {
        self.attacker_positions.len()
    }

    pub fn active_attackers(&self) -> BTreeSet<usize> {
        self.active
            .iter()
            .enumerate()
            .filter(|(_, a)| **a)
            .map(|(j, _)| j)
            .collect()
    }

    /// Pair view of one coalition against one attacker.
    pub fn view(&self, coalition: &Coalition, attacker: usize) -> Result<CoalitionView> {
        if attacker >= self.attacker_count() {
            return Err(Error::invalid(format!("no attacker {attacker}")));
        }
        let ids: Vec<usize> = coalition.ids().collect();
        let mut positions = Vec::with_capacity(ids.len());
        let mut speeds = Vec::with_capacity(ids.len());
        let mut radii = Vec::with_capacity(ids.len());
        for &i in &ids {
            if i >= self.defender_count() {
                return Err(Error::invalid(format!("no defender {i}")));
            }
            positions.push(self.defender_positions[i]);
            speeds.push(self.defender_speeds[i]);
            radii.push(self.capture_radii[i]);
        }
        CoalitionView::new(
            ids,
            positions,
            speeds,
            radii,
            attacker,
            self.attacker_positions[attacker],
            self.attacker_speeds[attacker],
        )
    }
}

/// Total reward of the assigned pairs. Every assigned pair must carry an
/// evaluation; since rewards are binary this equals the number of assigned
/// attackers whose pair is feasible.
pub fn gamma_value(
    assignment: &CoalitionAssignment,
    evaluations: &[PairEvaluation],
) -> Result<u64> {
    let mut total = 0;
    for (attacker, coalition) in assignment.pairs() {
        let eval = evaluations
            .iter()
            .find(|e| e.attacker_id == *attacker && e.coalition == *coalition)
            .ok_or_else(|| {
                Error::invalid(format!("no evaluation for attacker {attacker} pair"))
            })?;
        total += eval.reward;
    }
    Ok(total)
}

/// Defenders whose capture-frontier constraint is active at the separation
/// waypoint of a feasible pair.
///
/// A feasible pair always has a binding frontier (the waypoint cannot be
/// improved toward the target otherwise, since the target sits inside the
/// domain), but on borderline instances the solver may leave it just
/// outside the nominal activity band; the band widens in steps before the
/// impossible-case guard trips.
pub fn active_defense_set(
    view: &CoalitionView,
    solution: &SingleAttackSolution,
) -> Result<Coalition> {
    let offset = solution.frontier_offset;
    for eps in [EPS_ACTIVE, 1e-4, 1e-2] {
        let mut ids = BTreeSet::new();
        for k in 0..view.defender_ids.len() {
            let idx = offset + k;
            if solution
                .result
                .constraint_values
                .get(idx)
                .map(|v| v.abs() <= eps)
                .unwrap_or(false)
            {
                ids.insert(view.defender_ids[k]);
            }
        }
        if !ids.is_empty() {
            return Ok(Coalition(ids));
        }
    }
    Err(Error::Internal(
        "feasible pair produced an empty active-defense set".into(),
    ))
}

/// Lexicographic size-k subsets of a sorted id list.
fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(items: &[usize], k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        let need = k - current.len();
        for i in start..items.len() {
            if items.len() - i < need {
                break;
            }
            current.push(items[i]);
            rec(items, k, i + 1, current, out);
            current.pop();
        }
    }
    rec(items, k, 0, &mut current, &mut out);
    out
}

/// Irreducible sub-pairs of a feasible pair: walk subset sizes 1..=n over
/// the shrinking residual set, emit every feasible subset encountered, and
/// remove its members from the residual. When the size counter reaches the
/// original coalition's own size the original pair itself is emitted
/// without further solves (its evaluation comes from `parent`).
///
/// Every solve of a candidate subset advances the check counter by one.
pub fn irreducible_subpairs(
    parent: &PairEvaluation,
    state: &AllocationState,
    domain: &ConvexRegion,
    target: &ConvexRegion,
    counter: &mut CheckCounter,
) -> Result<Vec<PairEvaluation>> {
    let n = domain.dim();
    let attacker = parent.attacker_id;
    let coalition: Vec<usize> = parent.coalition.ids().collect();
    let mut residual: BTreeSet<usize> = coalition.iter().copied().collect();
    let mut out = Vec::new();

    for size in 1..=n {
        if residual.len() < size {
            break;
        }
        if coalition.len() == size {
            out.push(PairEvaluation {
                coalition: parent.coalition.clone(),
                attacker_id: attacker,
                reward: parent.reward,
                phi: parent.phi,
                waypoint: parent.waypoint,
                ads: None,
            });
            break;
        }
        let snapshot: Vec<usize> = residual.iter().copied().collect();
        for subset in combinations(&snapshot, size) {
            if !subset.iter().all(|d| residual.contains(d)) {
                continue;
            }
            let candidate = Coalition::new(subset.iter().copied())?;
            let view = state.view(&candidate, attacker)?;
            let solution = single_attack_solve(&view, domain, target, counter)?;
            if solution.feasible() {
                out.push(PairEvaluation {
                    coalition: candidate,
                    attacker_id: attacker,
                    reward: 1,
                    phi: solution.phi_raw(),
                    waypoint: solution.result.primal_q,
                    ads: None,
                });
                for d in subset {
                    residual.remove(&d);
                }
            }
        }
    }
    Ok(out)
}

/// Exact assignment solver over an explicit candidate list: maximize the
/// total reward subject to the conflict-free and redundancy-free
/// constraints. Depth-first search over attackers in ascending id order
/// with candidate coalitions in ascending lexicographic order, so the first
/// optimum found (and returned) is the lexicographically smallest one.
///
/// Zero-reward candidates are discarded up front: they cannot change the
/// objective, so the returned assignment (and its tie-break) ranges over
/// positive-reward pairs only.
pub fn solve_ilp_exact(candidates: &[PairEvaluation]) -> (CoalitionAssignment, u64) {
    let mut by_attacker: BTreeMap<usize, Vec<&PairEvaluation>> = BTreeMap::new();
    for c in candidates.iter().filter(|c| c.reward > 0) {
        by_attacker.entry(c.attacker_id).or_default().push(c);
    }
    let mut attackers: Vec<usize> = by_attacker.keys().copied().collect();
    attackers.sort_unstable();
    for list in by_attacker.values_mut() {
        list.sort_by(|a, b| a.coalition.cmp(&b.coalition));
        list.dedup_by(|a, b| a.coalition == b.coalition);
    }

    struct Search<'a> {
        attackers: Vec<usize>,
        by_attacker: &'a BTreeMap<usize, Vec<&'a PairEvaluation>>,
        best: Option<(u64, CoalitionAssignment)>,
    }

    impl Search<'_> {
        fn dfs(
            &mut self,
            idx: usize,
            used: &mut BTreeSet<usize>,
            current: &mut CoalitionAssignment,
            value: u64,
        ) {
            let remaining = (self.attackers.len() - idx) as u64;
            if let Some((best_value, _)) = &self.best {
                // Later subtrees with equal value are lexicographically
                // larger, so pruning on <= preserves the tie-break.
                if value + remaining <= *best_value {
                    return;
                }
            }
            if idx == self.attackers.len() {
                let better = match &self.best {
                    None => true,
                    Some((best_value, _)) => value > *best_value,
                };
                if better {
                    self.best = Some((value, current.clone()));
                }
                return;
            }
            let attacker = self.attackers[idx];
            for pair in &self.by_attacker[&attacker] {
                if pair.coalition.ids().any(|d| used.contains(&d)) {
                    continue;
                }
                for d in pair.coalition.ids() {
                    used.insert(d);
                }
                current
                    .insert(attacker, pair.coalition.clone())
                    .expect("disjointness checked");
                self.dfs(idx + 1, used, current, value + pair.reward);
                current.pairs.remove(&attacker);
                for d in pair.coalition.ids() {
                    used.remove(&d);
                }
            }
            // Leaving the attacker unassigned comes last: assigned
            // solutions of equal value are lexicographically smaller.
            self.dfs(idx + 1, used, current, value);
        }
    }

    let mut search = Search {
        attackers,
        by_attacker: &by_attacker,
        best: None,
    };
    let mut used = BTreeSet::new();
    let mut current = CoalitionAssignment::empty();
    search.dfs(0, &mut used, &mut current, 0);
    match search.best {
        Some((value, assignment)) => (assignment, value),
        None => (CoalitionAssignment::empty(), 0),
    }
}

/// Result of one hierarchical allocation pass.
#[derive(Clone, Debug)]
pub struct HilpOutcome {
    pub assignment: CoalitionAssignment,
    /// Objective value of the assignment; equals the number of assigned
    /// attackers because every pooled pair is feasible.
    pub value: u64,
    /// Minimum-distance solves spent inside this pass.
    pub check_count: u64,
    /// True when no unassigned feasible attacker remained after the first
    /// iteration, which certifies the result optimal.
    pub cleared_after_first_iteration: bool,
    /// Largest active-defense set encountered.
    pub max_ads_size: usize,
    pub iterations: usize,
}

/// Hierarchical allocation: per iteration, test the full residual defender
/// set against each residual attacker, reduce feasible pairs to their
/// active-defense sets, expand those into irreducible sub-pairs, and solve
/// the restricted assignment problem over the pooled priority set. Assigned
/// defenders and resolved attackers leave the residual sets; the loop runs
/// until either residual set (or the priority set) empties.
pub fn hilp(
    state: &AllocationState,
    domain: &ConvexRegion,
    target: &ConvexRegion,
    counter: &mut CheckCounter,
) -> Result<HilpOutcome> {
    let start_count = counter.count();
    let mut residual_defenders: BTreeSet<usize> = (0..state.defender_count()).collect();
    let mut residual_attackers: Vec<usize> = state.active_attackers().into_iter().collect();
    let mut assignment = CoalitionAssignment::empty();
    let mut evaluations: Vec<PairEvaluation> = Vec::new();
    let mut cleared_after_first_iteration = false;
    let mut max_ads_size = 0;
    let mut iterations = 0;

    while !residual_defenders.is_empty() && !residual_attackers.is_empty() {
        iterations += 1;
        let mut priority_set: Vec<PairEvaluation> = Vec::new();
        let full = Coalition::new(residual_defenders.iter().copied())?;
        let mut still_unresolved = Vec::new();
        for &attacker in &residual_attackers {
            let view = state.view(&full, attacker)?;
            let solution = single_attack_solve(&view, domain, target, counter)?;
            if !solution.feasible() {
                continue;
            }
            still_unresolved.push(attacker);
            let ads = active_defense_set(&view, &solution)?;
            max_ads_size = max_ads_size.max(ads.len());
            // The active-defense sub-pair inherits feasibility with the
            // same separation value and waypoint, so no extra solve is
            // needed to seed the sub-pair search.
            let parent = PairEvaluation {
                coalition: ads.clone(),
                attacker_id: attacker,
                reward: 1,
                phi: solution.phi_raw(),
                waypoint: solution.result.primal_q,
                ads: Some(ads),
            };
            let subs = irreducible_subpairs(&parent, state, domain, target, counter)?;
            priority_set.extend(subs);
        }
        residual_attackers = still_unresolved;

        if priority_set.is_empty() {
            break;
        }
        let (layer, layer_value) = solve_ilp_exact(&priority_set);
        debug_assert_eq!(layer_value as usize, layer.len());
        for (attacker, coalition) in layer.pairs() {
            for d in coalition.ids() {
                residual_defenders.remove(&d);
            }
            residual_attackers.retain(|j| j != attacker);
            if let Some(eval) = priority_set
                .iter()
                .find(|e| e.attacker_id == *attacker && e.coalition == *coalition)
            {
                evaluations.push(eval.clone());
            }
        }
        assignment.merge(layer)?;
        if iterations == 1 && residual_attackers.is_empty() {
            cleared_after_first_iteration = true;
        }
    }

    // Rewards are binary and every assigned pair is feasible, so the
    // objective equals the column count; keep both routes and check they
    // agree.
    let value = gamma_value(&assignment, &evaluations)?;
    debug_assert_eq!(value as usize, assignment.len());
    Ok(HilpOutcome {
        value,
        check_count: counter.count() - start_count,
        assignment,
        cleared_after_first_iteration,
        max_ads_size,
        iterations,
    })
}

/// Carry-over between allocation times: the previous adopted assignment
/// (before the greedy completion) and the active set it was built for.
#[derive(Clone, Debug)]
pub struct MdeaContext {
    previous_assignment: CoalitionAssignment,
    previous_active: BTreeSet<usize>,
}

impl MdeaContext {
    /// Initial context: the first hierarchical solution against the full
    /// attacker index set.
    pub fn initial(first: &CoalitionAssignment, all_attackers: usize) -> Self {
        MdeaContext {
            previous_assignment: first.clone(),
            previous_active: (0..all_attackers).collect(),
        }
    }

    pub fn previous_assignment(&self) -> &CoalitionAssignment {
        &self.previous_assignment
    }
}

/// Metrics of one allocation update.
#[derive(Clone, Debug, Serialize)]
pub struct MdeaRecord {
    /// Objective value of the adopted (pre-greedy) assignment.
    pub gamma: u64,
    /// Whether the new hierarchical solution replaced the previous one.
    pub adopted: bool,
}

/// Monotonic enhancement update. Part I adopts the new hierarchical
/// assignment only when its value strictly beats the previous assignment
/// after accounting for attackers that left the active set; otherwise the
/// previous assignment (with stale columns cleared) is kept, which
/// suppresses oscillation between equal-value optima. Part II greedily
/// sends every unassigned defender to the nearest unassigned active
/// attacker, merging defenders that pick the same attacker into one
/// coalition.
pub fn mdea(
    state: &AllocationState,
    hilp_assignment: &CoalitionAssignment,
    context: &mut MdeaContext,
) -> Result<(CoalitionAssignment, MdeaRecord)> {
    let active = state.active_attackers();
    if active.is_empty() {
        return Ok((
            CoalitionAssignment::empty(),
            MdeaRecord {
                gamma: 0,
                adopted: false,
            },
        ));
    }

    // Part I: monotonicity guard on the objective, measured through column
    // counts (equal to the reward sum for binary rewards).
    let gamma_new = hilp_assignment.len() as i64;
    let gamma_prev = context.previous_assignment.len() as i64;
    let threshold = gamma_prev - context.previous_active.len() as i64 + active.len() as i64;
    let (part1, adopted) = if gamma_new > threshold {
        (hilp_assignment.clone(), true)
    } else {
        let mut kept = context.previous_assignment.clone();
        kept.retain_attackers(&active);
        (kept, false)
    };
    context.previous_assignment = part1.clone();
    context.previous_active = active.clone();

    // Part II: greedy completion.
    let mut completed = part1.clone();
    let assigned_defenders = part1.assigned_defenders();
    let unassigned_defenders: Vec<usize> =
        (0..state.defender_count()).filter(|d| !assigned_defenders.contains(d)).collect();
    let unassigned_attackers: Vec<usize> = active
        .iter()
        .copied()
        .filter(|j| part1.coalition_of(*j).is_none())
        .collect();
    if !unassigned_defenders.is_empty() && !unassigned_attackers.is_empty() {
        for d in unassigned_defenders {
            let mut best = unassigned_attackers[0];
            let mut best_dist = f64::INFINITY;
            for &j in &unassigned_attackers {
                let dist = state.defender_positions[d].distance(&state.attacker_positions[j]);
                if dist < best_dist {
                    best_dist = dist;
                    best = j;
                }
            }
            completed.add_defender(best, d)?;
        }
    }
    completed.validate()?;
    Ok((
        completed,
        MdeaRecord {
            gamma: part1.len() as u64,
            adopted,
        },
    ))
}

/// Velocity commands for the whole defender team under an assignment:
/// each assigned coalition runs one dual-mode coordination step against its
/// attacker (skipped when that attacker is no longer active), and
/// unassigned defenders hold position.
pub fn defense_inputs(
    assignment: &CoalitionAssignment,
    state: &AllocationState,
    domain: &ConvexRegion,
    target: &ConvexRegion,
    counter: &mut CheckCounter,
) -> Result<BTreeMap<usize, Vector>> {
    let dim = domain.dim();
    let mut velocities: BTreeMap<usize, Vector> =
        (0..state.defender_count()).map(|d| (d, Vector::zeros(dim))).collect();
    for (attacker, coalition) in assignment.pairs() {
        if !state.active.get(*attacker).copied().unwrap_or(false) {
            continue;
        }
        let view = state.view(coalition, *attacker)?;
        let outcome = dmsdc_step(&view, domain, target, counter)?;
        for (id, v) in outcome.defender_velocities {
            velocities.insert(id, v);
        }
    }
    Ok(velocities)
}

/// Exhaustive reference solver: evaluate every coalition of size at most
/// the domain dimension for every active attacker, then run the exact
/// assignment search. Restricting to that size is lossless because any
/// feasible pair can be swapped for one of its irreducible sub-pairs
/// without changing the objective. Guarded to small teams.
pub fn exact_allocation_oracle(
    state: &AllocationState,
    domain: &ConvexRegion,
    target: &ConvexRegion,
    counter: &mut CheckCounter,
) -> Result<(CoalitionAssignment, u64)> {
    let n_defenders = state.defender_count();
    let m_attackers = state.attacker_count();
    if n_defenders > 8 || m_attackers > 6 {
        return Err(Error::InstanceTooLarge(format!(
            "exact oracle supports up to 8 defenders and 6 attackers, got {n_defenders}x{m_attackers}"
        )));
    }
    let all: Vec<usize> = (0..n_defenders).collect();
    let mut candidates = Vec::new();
    for attacker in state.active_attackers() {
        for size in 1..=domain.dim().min(n_defenders) {
            for subset in combinations(&all, size) {
                let coalition = Coalition::new(subset)?;
                let view = state.view(&coalition, attacker)?;
                let solution = single_attack_solve(&view, domain, target, counter)?;
                if solution.feasible() {
                    candidates.push(PairEvaluation {
                        coalition,
                        attacker_id: attacker,
                        reward: 1,
                        phi: solution.phi_raw(),
                        waypoint: solution.result.primal_q,
                        ads: None,
                    });
                }
            }
        }
    }
    Ok(solve_ilp_exact(&candidates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn box2(half: f64) -> ConvexRegion {
        ConvexRegion::bounding_box(&Vector::new2(-half, -half), &Vector::new2(half, half)).unwrap()
    }

    fn state2(
        defenders: &[(f64, f64)],
        radii: &[f64],
        attackers: &[(f64, f64)],
    ) -> AllocationState {
        AllocationState {
            defender_positions: defenders.iter().map(|p| Vector::new2(p.0, p.1)).collect(),
            defender_speeds: vec![1.0; defenders.len()],
            capture_radii: radii.to_vec(),
            attacker_positions: attackers.iter().map(|p| Vector::new2(p.0, p.1)).collect(),
            attacker_speeds: vec![1.0; attackers.len()],
            active: vec![true; attackers.len()],
        }
    }

    fn eval(coalition: &[usize], attacker: usize, reward: u64) -> PairEvaluation {
        PairEvaluation {
            coalition: Coalition::new(coalition.iter().copied()).unwrap(),
            attacker_id: attacker,
            reward,
            phi: reward as f64,
            waypoint: Vector::zeros(2),
            ads: None,
        }
    }

    #[test]
    fn gamma_value_cases() {
        let evals = vec![eval(&[0], 0, 1), eval(&[1], 1, 0)];
        let empty = CoalitionAssignment::empty();
        assert_eq!(gamma_value(&empty, &evals).unwrap(), 0);

        let mut two = CoalitionAssignment::empty();
        two.insert(0, Coalition::new([0]).unwrap()).unwrap();
        two.insert(1, Coalition::new([1]).unwrap()).unwrap();
        assert_eq!(gamma_value(&two, &evals).unwrap(), 1);

        let mut unknown = CoalitionAssignment::empty();
        unknown.insert(2, Coalition::new([0]).unwrap()).unwrap();
        assert!(gamma_value(&unknown, &evals).is_err());
    }

    #[test]
    fn assignment_rejects_conflicts_and_redundancy() {
        let mut a = CoalitionAssignment::empty();
        a.insert(0, Coalition::new([0, 1]).unwrap()).unwrap();
        assert!(a.insert(1, Coalition::new([1, 2]).unwrap()).is_err());
        assert!(a.insert(0, Coalition::new([3]).unwrap()).is_err());
        a.insert(1, Coalition::new([2]).unwrap()).unwrap();
        a.validate().unwrap();
    }

    #[test]
    fn ads_of_distant_second_defender_is_the_near_one() {
        let domain = box2(15.0);
        let target = ConvexRegion::ball(Vector::new2(0.0, 3.0), 1.0);
        let state = state2(&[(0.0, 2.0), (10.0, 10.0)], &[0.0, 0.0], &[(0.0, -2.0)]);
        let coalition = Coalition::new([0, 1]).unwrap();
        let view = state.view(&coalition, 0).unwrap();
        let mut counter = CheckCounter::new();
        let solution = single_attack_solve(&view, &domain, &target, &mut counter).unwrap();
        assert!(solution.feasible());
        let ads = active_defense_set(&view, &solution).unwrap();
        assert_eq!(ads, Coalition::new([0]).unwrap());
    }

    #[test]
    fn ads_of_symmetric_pinch_holds_both_defenders() {
        let domain = box2(5.0);
        let target = ConvexRegion::ball(Vector::new2(0.0, 3.0), 1.0);
        let state = state2(&[(-2.0, 2.0), (2.0, 2.0)], &[0.0, 0.0], &[(0.0, -2.0)]);
        let coalition = Coalition::new([0, 1]).unwrap();
        let view = state.view(&coalition, 0).unwrap();
        let mut counter = CheckCounter::new();
        let solution = single_attack_solve(&view, &domain, &target, &mut counter).unwrap();
        assert!(solution.feasible());
        let ads = active_defense_set(&view, &solution).unwrap();
        assert_eq!(ads, Coalition::new([0, 1]).unwrap());
    }

    #[test]
    fn singleton_feasible_pair_needs_no_extra_solves() {
        let domain = box2(5.0);
        let target = ConvexRegion::ball(Vector::new2(0.0, 3.0), 1.0);
        let state = state2(&[(0.0, 2.0)], &[0.0], &[(0.0, -2.0)]);
        let parent = PairEvaluation {
            coalition: Coalition::new([0]).unwrap(),
            attacker_id: 0,
            reward: 1,
            phi: 4.0,
            waypoint: Vector::new2(0.0, 0.0),
            ads: None,
        };
        let mut counter = CheckCounter::new();
        let subs =
            irreducible_subpairs(&parent, &state, &domain, &target, &mut counter).unwrap();
        assert_eq!(counter.count(), 0);
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].coalition, parent.coalition);
    }

    #[test]
    fn two_singly_feasible_defenders_split_into_singletons() {
        let domain = box2(5.0);
        let target = ConvexRegion::ball(Vector::new2(0.0, 4.0), 0.5);
        let state = state2(&[(-0.3, 1.5), (0.3, 1.5)], &[0.0, 0.0], &[(0.0, -3.0)]);
        // Both singletons must be feasible on their own for this fixture.
        let mut counter = CheckCounter::new();
        for d in 0..2 {
            let view = state
                .view(&Coalition::singleton(d), 0)
                .unwrap();
            let s = single_attack_solve(&view, &domain, &target, &mut counter).unwrap();
            assert!(s.feasible(), "singleton {d} infeasible: {}", s.phi_raw());
        }
        let parent = PairEvaluation {
            coalition: Coalition::new([0, 1]).unwrap(),
            attacker_id: 0,
            reward: 1,
            phi: 1.0,
            waypoint: Vector::zeros(2),
            ads: None,
        };
        let before = counter.count();
        let subs =
            irreducible_subpairs(&parent, &state, &domain, &target, &mut counter).unwrap();
        assert_eq!(counter.count() - before, 2);
        let coalitions: Vec<_> = subs.iter().map(|s| s.coalition.clone()).collect();
        assert_eq!(
            coalitions,
            vec![Coalition::new([0]).unwrap(), Coalition::new([1]).unwrap()]
        );
    }

    #[test]
    fn flanking_pair_is_emitted_whole() {
        let domain = box2(5.0);
        let target = ConvexRegion::ball(Vector::new2(0.0, 4.0), 0.6);
        let state = state2(&[(-1.8, 3.6), (1.8, 3.6)], &[0.0, 0.0], &[(0.0, 1.5)]);
        let mut counter = CheckCounter::new();
        for d in 0..2 {
            let view = state.view(&Coalition::singleton(d), 0).unwrap();
            let s = single_attack_solve(&view, &domain, &target, &mut counter).unwrap();
            assert!(!s.feasible(), "singleton {d} unexpectedly feasible");
        }
        let pair = Coalition::new([0, 1]).unwrap();
        let view = state.view(&pair, 0).unwrap();
        let s = single_attack_solve(&view, &domain, &target, &mut counter).unwrap();
        assert!(s.feasible(), "pair infeasible: phi {}", s.phi_raw());

        let parent = PairEvaluation {
            coalition: pair.clone(),
            attacker_id: 0,
            reward: 1,
            phi: s.phi_raw(),
            waypoint: s.result.primal_q,
            ads: None,
        };
        let before = counter.count();
        let subs =
            irreducible_subpairs(&parent, &state, &domain, &target, &mut counter).unwrap();
        // Two singleton checks, then the size-2 early exit emits the pair.
        assert_eq!(counter.count() - before, 2);
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].coalition, pair);
    }

    #[test]
    fn ilp_empty_and_shared_defender_tie_break() {
        let (assignment, value) = solve_ilp_exact(&[]);
        assert!(assignment.is_empty());
        assert_eq!(value, 0);

        // Two attackers compete for defender 0; the smaller attacker id
        // wins the tie.
        let candidates = vec![eval(&[0], 1, 1), eval(&[0], 0, 1)];
        let (assignment, value) = solve_ilp_exact(&candidates);
        assert_eq!(value, 1);
        assert!(assignment.coalition_of(0).is_some());
        assert!(assignment.coalition_of(1).is_none());
    }

    /// Brute-force enumeration over all positive-reward candidate subsets
    /// as an independent check of the branch-and-bound search.
    fn enumerate_best(all: &[PairEvaluation]) -> (u64, Vec<(usize, Vec<usize>)>) {
        let candidates: Vec<&PairEvaluation> = all.iter().filter(|c| c.reward > 0).collect();
        let m = candidates.len();
        let mut best_value = 0;
        let mut best_key: Option<Vec<(usize, Vec<usize>)>> = None;
        'mask: for mask in 0u32..(1 << m) {
            let mut assignment = CoalitionAssignment::empty();
            let mut value = 0;
            for (i, c) in candidates.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    if assignment.insert(c.attacker_id, c.coalition.clone()).is_err() {
                        continue 'mask;
                    }
                    value += c.reward;
                }
            }
            let key = assignment.key();
            let better = value > best_value
                || (value == best_value
                    && best_key.as_ref().map(|b| key < *b).unwrap_or(true));
            if better {
                best_value = value;
                best_key = Some(key);
            }
        }
        (best_value, best_key.unwrap_or_default())
    }

    #[test]
    fn ilp_matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..60 {
            let n_pairs = rng.gen_range(1..=10);
            let mut candidates = Vec::new();
            for _ in 0..n_pairs {
                let attacker = rng.gen_range(0..4);
                let size = rng.gen_range(1..=2);
                let mut ids = BTreeSet::new();
                while ids.len() < size {
                    ids.insert(rng.gen_range(0..5usize));
                }
                candidates.push(PairEvaluation {
                    coalition: Coalition::new(ids).unwrap(),
                    attacker_id: attacker,
                    reward: rng.gen_range(0..=1),
                    phi: 1.0,
                    waypoint: Vector::zeros(2),
                    ads: None,
                });
            }
            let (assignment, value) = solve_ilp_exact(&candidates);
            assignment.validate().unwrap();
            let (best_value, best_key) = enumerate_best(&candidates);
            assert_eq!(value, best_value);
            assert_eq!(assignment.key(), best_key);
        }
    }

    #[test]
    fn hilp_single_pair_uses_one_check() {
        // One defender, one attacker, feasible: the feasibility probe of
        // the full pair is the only solve, because the active-defense set
        // is the whole (single-defender) coalition and the sub-pair walk
        // hits its size-match exit without solving anything.
        let domain = box2(5.0);
        let target = ConvexRegion::ball(Vector::new2(0.0, 3.0), 1.0);
        let state = state2(&[(0.0, 2.0)], &[0.0], &[(0.0, -2.0)]);
        let mut counter = CheckCounter::new();
        let outcome = hilp(&state, &domain, &target, &mut counter).unwrap();
        assert_eq!(outcome.value, 1);
        assert_eq!(
            outcome.assignment.coalition_of(0),
            Some(&Coalition::new([0]).unwrap())
        );
        assert_eq!(outcome.check_count, 1);
        assert_eq!(counter.count(), 1);
        assert!(outcome.cleared_after_first_iteration);
    }

    #[test]
    fn hilp_with_no_feasible_pair_returns_empty() {
        let domain = box2(5.0);
        let target = ConvexRegion::ball(Vector::new2(0.0, 0.0), 2.0);
        // Attacker sits inside the target already.
        let state = state2(&[(4.0, 4.0)], &[0.2], &[(0.5, 0.0)]);
        let mut counter = CheckCounter::new();
        let outcome = hilp(&state, &domain, &target, &mut counter).unwrap();
        assert_eq!(outcome.value, 0);
        assert!(outcome.assignment.is_empty());
    }

    #[test]
    fn hilp_matches_oracle_on_disjoint_instances() {
        // Attackers far apart, each with a nearby blocker: the first
        // iteration resolves everything and the heuristic is exact.
        let domain = box2(5.0);
        let target = ConvexRegion::ball(Vector::new2(0.0, 0.0), 1.0);
        let state = state2(
            &[(-3.0, -0.5), (3.0, -0.5), (0.0, 2.5)],
            &[0.3, 0.3, 0.3],
            &[(-4.2, -1.2), (4.2, -1.2), (0.0, 4.2)],
        );
        let mut counter = CheckCounter::new();
        let outcome = hilp(&state, &domain, &target, &mut counter).unwrap();
        let mut oracle_counter = CheckCounter::new();
        let (_, oracle_value) =
            exact_allocation_oracle(&state, &domain, &target, &mut oracle_counter).unwrap();
        assert_eq!(outcome.value, oracle_value);
        assert!(outcome.cleared_after_first_iteration);
        assert_eq!(outcome.value, 3);
    }

    #[test]
    fn mdea_adopts_keeps_and_completes() {
        let state = state2(
            &[(0.0, 0.0), (2.0, 0.0)],
            &[0.2, 0.2],
            &[(1.0, 0.0), (5.0, 0.0)],
        );

        let mut one = CoalitionAssignment::empty();
        one.insert(0, Coalition::new([0]).unwrap()).unwrap();
        let mut two = CoalitionAssignment::empty();
        two.insert(0, Coalition::new([0]).unwrap()).unwrap();
        two.insert(1, Coalition::new([1]).unwrap()).unwrap();

        // Strict improvement adopts the new assignment.
        let mut context = MdeaContext::initial(&one, 2);
        let (adopted, record) = mdea(&state, &two, &mut context).unwrap();
        assert!(record.adopted);
        assert_eq!(record.gamma, 2);
        assert_eq!(adopted.len(), 2);

        // Equal value keeps the previous assignment (anti-oscillation).
        let mut other = CoalitionAssignment::empty();
        other.insert(0, Coalition::new([1]).unwrap()).unwrap();
        other.insert(1, Coalition::new([0]).unwrap()).unwrap();
        let (kept, record) = mdea(&state, &other, &mut context).unwrap();
        assert!(!record.adopted);
        assert_eq!(kept.coalition_of(0), Some(&Coalition::new([0]).unwrap()));

        // Greedy completion: with nothing assigned, each defender heads to
        // its nearest active attacker (defender 0 and 1 both to attacker 0).
        let mut fresh = MdeaContext::initial(&CoalitionAssignment::empty(), 2);
        let (completed, record) =
            mdea(&state, &CoalitionAssignment::empty(), &mut fresh).unwrap();
        assert_eq!(record.gamma, 0);
        assert_eq!(
            completed.coalition_of(0),
            Some(&Coalition::new([0, 1]).unwrap())
        );
    }

    #[test]
    fn mdea_zeroes_stale_columns_when_keeping() {
        let mut state = state2(
            &[(0.0, 0.0), (2.0, 0.0)],
            &[0.2, 0.2],
            &[(1.0, 0.0), (4.0, 0.0)],
        );
        let mut both = CoalitionAssignment::empty();
        both.insert(0, Coalition::new([0]).unwrap()).unwrap();
        both.insert(1, Coalition::new([1]).unwrap()).unwrap();
        let mut context = MdeaContext::initial(&both, 2);

        // Attacker 0 is captured before the next allocation.
        state.active[0] = false;
        let mut hilp_now = CoalitionAssignment::empty();
        hilp_now.insert(1, Coalition::new([1]).unwrap()).unwrap();
        let (next, record) = mdea(&state, &hilp_now, &mut context).unwrap();
        assert!(!record.adopted);
        assert!(next.coalition_of(0).is_none());
        assert!(next.coalition_of(1).is_some());
        assert_eq!(record.gamma, 1);
    }

    #[test]
    fn mdea_is_stable_on_repeated_calls() {
        let state = state2(
            &[(0.0, 1.0), (1.0, 1.0)],
            &[0.2, 0.2],
            &[(0.5, -2.0), (3.0, -2.0)],
        );
        let mut hilp_like = CoalitionAssignment::empty();
        hilp_like.insert(0, Coalition::new([0]).unwrap()).unwrap();
        hilp_like.insert(1, Coalition::new([1]).unwrap()).unwrap();
        let mut context = MdeaContext::initial(&hilp_like, 2);
        let (first, _) = mdea(&state, &hilp_like, &mut context).unwrap();
        for _ in 0..5 {
            let (again, record) = mdea(&state, &hilp_like, &mut context).unwrap();
            assert_eq!(again, first);
            assert!(!record.adopted);
        }
    }

    #[test]
    fn ads_subpair_keeps_the_separation_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let domain = box2(5.0);
        let mut tested = 0;
        while tested < 10 {
            let target = ConvexRegion::ball(
                Vector::new2(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                0.8,
            );
            let state = state2(
                &[
                    (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)),
                    (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)),
                    (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)),
                ],
                &[0.3, 0.3, 0.3],
                &[(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0))],
            );
            let coalition = Coalition::new([0, 1, 2]).unwrap();
            let view = state.view(&coalition, 0).unwrap();
            let mut counter = CheckCounter::new();
            let solution = single_attack_solve(&view, &domain, &target, &mut counter).unwrap();
            if !solution.feasible() {
                continue;
            }
            tested += 1;
            let ads = active_defense_set(&view, &solution).unwrap();
            let sub_view = state.view(&ads, 0).unwrap();
            let sub = single_attack_solve(&sub_view, &domain, &target, &mut counter).unwrap();
            assert!(sub.feasible());
            assert!(
                (sub.phi_raw() - solution.phi_raw()).abs() < 1e-5,
                "phi {} vs {}",
                sub.phi_raw(),
                solution.phi_raw()
            );
        }
    }

    #[test]
    fn defense_inputs_compose_independent_pairs() {
        let domain = box2(5.0);
        let target = ConvexRegion::ball(Vector::new2(0.0, 0.0), 1.0);
        let state = state2(
            &[(-3.0, -0.5), (3.0, -0.5)],
            &[0.3, 0.3],
            &[(-4.2, -1.2), (4.2, -1.2)],
        );
        let mut both = CoalitionAssignment::empty();
        both.insert(0, Coalition::new([0]).unwrap()).unwrap();
        both.insert(1, Coalition::new([1]).unwrap()).unwrap();
        let mut counter = CheckCounter::new();
        let merged = defense_inputs(&both, &state, &domain, &target, &mut counter).unwrap();

        let mut single0 = CoalitionAssignment::empty();
        single0.insert(0, Coalition::new([0]).unwrap()).unwrap();
        let alone0 =
            defense_inputs(&single0, &state, &domain, &target, &mut counter).unwrap();
        assert_eq!(merged[&0], alone0[&0]);
        assert_eq!(alone0[&1], Vector::zeros(2));

        // Empty assignment keeps everyone still.
        let idle = defense_inputs(
            &CoalitionAssignment::empty(),
            &state,
            &domain,
            &target,
            &mut counter,
        )
        .unwrap();
        assert!(idle.values().all(|v| *v == Vector::zeros(2)));
    }
}
