//! Command-line front end: run one game, run a benchmark batch, render a
//! safe-reachable-set plot, or verify a scenario against the library's
//! core invariants.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use reach_avoid::allocation::Coalition;
use reach_avoid::bench::{render_table, run_bench};
use reach_avoid::coordination::single_attack_solve;
use reach_avoid::engine::{
    run_game, summarize, write_trace_csv, ScenarioConfig, TerminationReason,
};
use reach_avoid::geometry::region_contains;
use reach_avoid::plot::{emit_srs_plot, PlotArtifact};
use reach_avoid::scenario::{
    attack_policy_name, defense_policy_name, load_config, load_scenario, parse_attack_policy,
    parse_defense_policy, ConfigFile,
};
use reach_avoid::solver::{kkt_residual, solve_min_distance, CheckCounter, KktProblem, SolveStatus};
use reach_avoid::Vector;

#[derive(Parser)]
#[command(
    name = "reach-avoid",
    about = "Defense coordination and allocation for multiplayer reach-avoid games",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TimeOverrides {
    /// Control step override, seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Allocation period override, seconds.
    #[arg(long = "alloc-period")]
    alloc_period: Option<f64>,
    /// Game length cap override, seconds.
    #[arg(long = "t-max")]
    t_max: Option<f64>,
}

impl TimeOverrides {
    fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(dt) = self.dt {
            config.dt = dt;
        }
        if let Some(p) = self.alloc_period {
            config.allocation_period = p;
        }
        if let Some(t) = self.t_max {
            config.t_max = t;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one game from a scenario file and write its trace and summary.
    Simulate {
        config: PathBuf,
        /// Defense policy: mdea, initial, or none.
        #[arg(long, default_value = "mdea")]
        defense: String,
        /// Attack policy: optimal, straight, or random.
        #[arg(long, default_value = "optimal")]
        attack: String,
        /// RNG seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the trace CSV and summary JSON.
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        times: TimeOverrides,
    },
    /// Run a randomized benchmark batch from a bench spec file.
    Bench {
        spec: PathBuf,
        /// Trial count override.
        #[arg(long)]
        trials: Option<usize>,
        /// Base seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override.
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
        /// Worker pool size; 0 means one worker per core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Defense policies override (repeatable).
        #[arg(long)]
        defense: Vec<String>,
        /// Attack policies override (repeatable).
        #[arg(long)]
        attack: Vec<String>,
        #[command(flatten)]
        times: TimeOverrides,
    },
    /// Render the safe-reachable set of one attacker to SVG (2D) or a
    /// boundary point cloud CSV (3D).
    Srs {
        config: PathBuf,
        /// Attacker index.
        #[arg(long, default_value_t = 0)]
        attacker: usize,
        /// Comma-separated defender indices; all defenders by default.
        #[arg(long)]
        coalition: Option<String>,
        /// Output file path.
        #[arg(long, default_value = "srs.svg")]
        out: PathBuf,
    },
    /// Run the invariant suite against one scenario; exits nonzero on any
    /// failed check.
    Verify { config: PathBuf },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            defense,
            attack,
            seed,
            out_dir,
            times,
        } => {
            let mut scenario = load_scenario(&config)?;
            if let Some(seed) = seed {
                scenario.rng_seed = seed;
            }
            times.apply(&mut scenario);
            let defense = parse_defense_policy(&defense)?;
            let attack = parse_attack_policy(&attack)?;
            let trace = run_game(&scenario, defense, attack)?;
            let summary = summarize(&trace, &scenario);
            println!(
                "payoff {} | captured {} | reached {} | active-at-end {} | {:?} | allocation checks {}",
                summary.payoff,
                summary.captured,
                summary.reached,
                summary.timed_out_active,
                summary.termination_reason,
                summary.allocation_checks
            );
            if let Some(dir) = out_dir {
                fs::create_dir_all(&dir)?;
                let stem = format!(
                    "{}-{}",
                    defense_policy_name(defense),
                    attack_policy_name(attack)
                );
                let mut csv = Vec::new();
                write_trace_csv(&trace, &scenario, &mut csv)?;
                fs::write(dir.join(format!("{stem}.csv")), csv)?;
                fs::write(
                    dir.join(format!("{stem}.json")),
                    serde_json::to_vec_pretty(&summary)?,
                )?;
                println!("wrote {stem}.csv and {stem}.json under {}", dir.display());
            }
        }
        Command::Bench {
            spec,
            trials,
            seed,
            out_dir,
            workers,
            defense,
            attack,
            times,
        } => {
            let mut spec = match load_config(&spec)? {
                ConfigFile::Bench(spec) => *spec,
                ConfigFile::Scenario(_) => {
                    bail!("{} is a scenario, not a bench spec", spec.display())
                }
            };
            if let Some(trials) = trials {
                spec.trials = trials;
            }
            if let Some(seed) = seed {
                spec.base_seed = seed;
            }
            if !defense.is_empty() {
                spec.defense_policies = defense;
            }
            if !attack.is_empty() {
                spec.attack_policies = attack;
            }
            if let Some(dt) = times.dt {
                spec.template.dt = dt;
            }
            if let Some(p) = times.alloc_period {
                spec.template.allocation_period = p;
            }
            if let Some(t) = times.t_max {
                spec.template.t_max = t;
            }
            let out_dir = out_dir.or_else(|| spec.out_dir.clone().map(PathBuf::from));
            let report = run_bench(&spec, out_dir.as_deref(), workers)?;
            print!("{}", render_table(&report));
            if let Some(dir) = out_dir {
                println!("artifacts under {}", dir.display());
            }
        }
        Command::Srs {
            config,
            attacker,
            coalition,
            out,
        } => {
            let scenario = load_scenario(&config)?;
            let ids: Vec<usize> = match coalition {
                Some(text) => text
                    .split(',')
                    .map(|s| s.trim().parse::<usize>().context("bad coalition index"))
                    .collect::<anyhow::Result<_>>()?,
                None => (0..scenario.defenders.len()).collect(),
            };
            let coalition = Coalition::new(ids)?;
            match emit_srs_plot(&scenario, attacker, &coalition, &out)? {
                PlotArtifact::Svg => println!("wrote {}", out.display()),
                PlotArtifact::EmptyRegionSvg => println!(
                    "safe-reachable set is empty; annotated plot at {}",
                    out.display()
                ),
                PlotArtifact::PointCloudCsv => println!(
                    "3D scenario: boundary point cloud at {}",
                    out.display()
                ),
            }
        }
        Command::Verify { config } => {
            let scenario = load_scenario(&config)?;
            verify(&scenario)?;
        }
    }
    Ok(())
}

/// Scenario-level invariant suite. Prints one line per check.
fn verify(config: &ScenarioConfig) -> anyhow::Result<()> {
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}{detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // Solver contracts on every initial pair view.
    let state = reach_avoid::engine::JointState::initial(config).allocation_state(config);
    let full = Coalition::new(0..config.defenders.len()).ok();
    let mut counter = CheckCounter::new();
    if let Some(full) = &full {
        for attacker in 0..config.attackers.len() {
            let view = state.view(full, attacker)?;
            let srs = view.srs(&config.domain)?;
            let solution =
                single_attack_solve(&view, &config.domain, &config.target, &mut counter)?;
            if solution.result.status == SolveStatus::Infeasible {
                check(
                    &format!("solver.pair_{attacker}"),
                    false,
                    " (safe-reachable set empty at start)".into(),
                );
                continue;
            }
            let residual = kkt_residual(
                &solution.result,
                &KktProblem::MinDistance {
                    region_a: &srs,
                    region_b: &config.target,
                },
            )?;
            let slackness = solution
                .result
                .multipliers
                .iter()
                .zip(&solution.result.constraint_values)
                .map(|(l, v)| (l * v).abs())
                .fold(0.0f64, f64::max);
            let signs = solution.result.multipliers.iter().all(|l| *l >= -1e-10);
            let ok = residual <= 1e-6 && slackness <= 1e-6 && signs;
            check(
                &format!("solver.pair_{attacker}"),
                ok,
                format!(
                    " (phi {:.6}, kkt {residual:.2e}, compl {slackness:.2e})",
                    solution.phi_raw()
                ),
            );

            let again = single_attack_solve(&view, &config.domain, &config.target, &mut counter)?;
            check(
                &format!("solver.deterministic_{attacker}"),
                again.result == solution.result,
                String::new(),
            );
        }
    }

    // Geometry reduction probe built from this scenario's first pair.
    if !config.defenders.is_empty() && !config.attackers.is_empty() {
        let d = config.defenders[0].position;
        let a = config.attackers[0].position;
        if d.distance(&a) > 1e-9 {
            let voronoi_srs =
                reach_avoid::geometry::build_srs(&[d], &a, &[1.0], &[0.0], &config.domain)?;
            let mut ok = true;
            let mut rng_state = 0x243F6A8885A308D3u64;
            let mut rng = || {
                rng_state ^= rng_state << 13;
                rng_state ^= rng_state >> 7;
                rng_state ^= rng_state << 17;
                (rng_state >> 11) as f64 / (1u64 << 53) as f64
            };
            for _ in 0..10_000 {
                let mut q = Vector::zeros(config.dimension);
                for k in 0..config.dimension {
                    q[k] = (rng() - 0.5) * 12.0;
                }
                let inside = region_contains(&voronoi_srs, &q, 0.0)?;
                let predicate =
                    q.distance(&a) <= q.distance(&d) && config.domain.contains(&q, 0.0)?;
                if inside != predicate {
                    ok = false;
                    break;
                }
            }
            check("geometry.voronoi_reduction", ok, String::new());
        }
    }

    // One short game per attack policy: conservation, the payoff bound,
    // and monotone gamma + captures.
    let mut short = config.clone();
    short.t_max = config.t_max.min(8.0);
    for (attack, name) in [
        (reach_avoid::engine::AttackPolicy::Optimal, "optimal"),
        (reach_avoid::engine::AttackPolicy::StraightLine, "straight"),
        (reach_avoid::engine::AttackPolicy::Random, "random"),
    ] {
        let trace = run_game(&short, reach_avoid::engine::DefensePolicy::Mdea, attack)?;
        let m = short.attackers.len();
        let conserved = trace
            .states
            .iter()
            .all(|s| s.active_count() + s.captured_count() + s.reached_count() == m);
        check(
            &format!("engine.conservation_{name}"),
            conserved,
            String::new(),
        );
        let initial = trace.allocations.first();
        let bound = m as i64
            - initial.map(|r| r.gamma).unwrap_or(0) as i64
            - initial.map(|r| r.captured_so_far).unwrap_or(0) as i64;
        check(
            &format!("engine.payoff_bound_{name}"),
            (trace.payoff as i64) <= bound,
            format!(" (payoff {} <= {bound})", trace.payoff),
        );
        let mut prev = None;
        let mut monotone = true;
        for record in &trace.allocations {
            let value = record.gamma + record.captured_so_far;
            if let Some(p) = prev {
                if value < p {
                    monotone = false;
                }
            }
            prev = Some(value);
        }
        check(
            &format!("engine.monotone_objective_{name}"),
            monotone,
            String::new(),
        );
        if trace.termination == TerminationReason::Timeout && trace.timed_out_active > 0 {
            println!("NOTE engine.{name}: game hit the shortened time cap with active attackers");
        }
    }

    // The separation value agrees with the squared distance between the
    // reported primal points.
    if let Some(full) = &full {
        for attacker in 0..config.attackers.len() {
            let view = state.view(full, attacker)?;
            let srs = view.srs(&config.domain)?;
            let result = solve_min_distance(&srs, &config.target, &mut counter)?;
            if result.status != SolveStatus::Infeasible {
                let qt = result.primal_qtilde.unwrap();
                let direct = (result.primal_q - qt).norm_squared();
                check(
                    &format!("solver.value_route_{attacker}"),
                    (direct - result.value).abs() <= 1e-9 * (1.0 + result.value),
                    String::new(),
                );
            }
        }
    }

    if failures > 0 {
        bail!("{failures} verification check(s) failed");
    }
    println!("all checks passed");
    Ok(())
}
