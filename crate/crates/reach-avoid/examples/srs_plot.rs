//! Render the safe-reachable set of one attacker against two defenders
//! with unequal speed ratios and capture radii.
//!
//! Run with `cargo run --release --example srs_plot`, then open
//! `out/srs.svg`.

use std::fs;
use std::path::Path;

use reach_avoid::allocation::Coalition;
use reach_avoid::engine::{AttackerSpec, DefenderSpec, ScenarioConfig};
use reach_avoid::geometry::ConvexRegion;
use reach_avoid::plot::emit_srs_plot;
use reach_avoid::Vector;

fn main() -> anyhow::Result<()> {
    let config = ScenarioConfig {
        dimension: 2,
        domain: ConvexRegion::bounding_box(&Vector::new2(-5.0, -5.0), &Vector::new2(5.0, 5.0))?,
        target: ConvexRegion::ball(Vector::new2(0.0, 4.0), 0.8),
        defenders: vec![
            DefenderSpec {
                position: Vector::new2(-2.0, 1.0),
                max_speed: 1.0,
                capture_radius: 2.0,
            },
            DefenderSpec {
                position: Vector::new2(2.5, -1.0),
                max_speed: 2.0,
                capture_radius: 0.5,
            },
        ],
        attackers: vec![AttackerSpec {
            position: Vector::new2(0.0, -3.0),
            max_speed: 1.0,
        }],
        dt: 0.01,
        allocation_period: 0.1,
        t_max: 10.0,
        rng_seed: 0,
    };
    fs::create_dir_all("out")?;
    let coalition = Coalition::new([0, 1])?;
    let artifact = emit_srs_plot(&config, 0, &coalition, Path::new("out/srs.svg"))?;
    println!("wrote out/srs.svg ({artifact:?})");
    println!("the red region is what the attacker can still reach safely;");
    println!("blue disks are capture regions, green is the target, the purple");
    println!("cross is the separation waypoint both sides steer toward.");
    Ok(())
}
