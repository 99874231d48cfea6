//! Paired-seed benchmark: live reallocation against a frozen initial
//! assignment, same scenarios, same attacker.
//!
//! Run with `cargo run --release --example paired_benchmark`.

use reach_avoid::bench::{render_table, run_bench};
use reach_avoid::scenario::{AgentTemplate, BenchSpec, RegionSpec, ScenarioTemplate};

fn main() -> anyhow::Result<()> {
    let spec = BenchSpec {
        template: ScenarioTemplate {
            dimension: 2,
            domain: RegionSpec::Box {
                lo: vec![-5.0, -5.0],
                hi: vec![5.0, 5.0],
            },
            target: RegionSpec::Ball {
                center: vec![0.0, 0.0],
                radius: 0.9,
            },
            defenders: AgentTemplate {
                count: 4,
                max_speed: 1.15,
                capture_radius: 0.4,
            },
            attackers: AgentTemplate {
                count: 4,
                max_speed: 1.0,
                capture_radius: 0.0,
            },
            dt: 0.02,
            allocation_period: 0.1,
            t_max: 60.0,
        },
        trials: 20,
        base_seed: 77,
        defense_policies: vec!["mdea".into(), "initial".into(), "none".into()],
        attack_policies: vec!["optimal".into()],
        out_dir: None,
    };
    let report = run_bench(&spec, None, 0)?;
    print!("{}", render_table(&report));
    Ok(())
}
