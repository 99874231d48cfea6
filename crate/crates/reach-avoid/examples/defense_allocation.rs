//! Assigning coalitions to attackers: the hierarchical heuristic against
//! the exact branch-and-bound oracle, with check counts.
//!
//! Run with `cargo run --release --example defense_allocation`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use reach_avoid::allocation::{exact_allocation_oracle, hilp, AllocationState};
use reach_avoid::geometry::ConvexRegion;
use reach_avoid::solver::CheckCounter;
use reach_avoid::Vector;

fn main() -> anyhow::Result<()> {
    let domain =
        ConvexRegion::bounding_box(&Vector::new2(-5.0, -5.0), &Vector::new2(5.0, 5.0))?;
    let target = ConvexRegion::ball(Vector::new2(0.0, 0.0), 1.0);
    let mut rng = ChaCha20Rng::seed_from_u64(12);

    for instance in 0..5 {
        let n = rng.gen_range(3..=6);
        let m = rng.gen_range(2..=5);
        let mut defenders = Vec::new();
        for _ in 0..n {
            defenders.push(Vector::new2(
                rng.gen_range(-4.5..4.5),
                rng.gen_range(-4.5..4.5),
            ));
        }
        let mut attackers = Vec::new();
        while attackers.len() < m {
            let p = Vector::new2(rng.gen_range(-4.5..4.5), rng.gen_range(-4.5..4.5));
            if !target.contains(&p, 0.0)? {
                attackers.push(p);
            }
        }
        let state = AllocationState {
            defender_positions: defenders,
            defender_speeds: vec![1.2; n],
            capture_radii: vec![0.4; n],
            attacker_positions: attackers,
            attacker_speeds: vec![1.0; m],
            active: vec![true; m],
        };

        let mut heuristic_counter = CheckCounter::new();
        let outcome = hilp(&state, &domain, &target, &mut heuristic_counter)?;
        let mut oracle_counter = CheckCounter::new();
        let (_, exact) = exact_allocation_oracle(&state, &domain, &target, &mut oracle_counter)?;

        println!(
            "instance {instance}: {n} defenders vs {m} attackers | heuristic {} (checks {}) \
             | exact {} (checks {}) | exact-by-clearing {}",
            outcome.value,
            outcome.check_count,
            exact,
            oracle_counter.count(),
            outcome.cleared_after_first_iteration,
        );
        for (attacker, coalition) in outcome.assignment.pairs() {
            let ids: Vec<usize> = coalition.ids().collect();
            println!("    attacker {attacker} <- defenders {ids:?}");
        }
    }
    Ok(())
}
