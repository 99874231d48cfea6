//! Randomized benchmark harness: batch trial execution, outcome tallies,
//! and artifact emission.
//!
//! Each trial samples one scenario from the template (deterministic in the
//! per-trial seed) and plays it under every requested defense/attack
//! policy combination, so cross-policy comparisons are always paired by
//! seed. Trials run on a bounded worker pool; aggregation happens after
//! all workers join, in trial order, so rerunning a spec reproduces every
//! output byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{
    payoff, run_game, summarize, write_trace_csv, GameTrace, ScenarioConfig, TerminationReason,
};
use crate::error::{Error, Result};
use crate::scenario::{generate_random_scenario, policy_labels, trial_seed, BenchSpec};

/// How one trial ended, from the defense team's perspective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OutcomeCategory {
    /// No attacker reached the target and none were left active.
    DefenseSuccessCapture,
    /// No attacker reached the target but some were still active at the
    /// time cap.
    DefenseSuccessTimeout,
    /// At least one attacker reached the target.
    DefenseFail,
}

/// Digest of one (trial, policy combination) game.
#[derive(Clone, Debug, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub category: OutcomeCategory,
    pub payoff: u64,
    pub captured: u64,
    pub reached: u64,
    pub timed_out_active: u64,
    pub termination: TerminationReason,
    /// Total minimum-distance solves spent on allocation decisions.
    pub check_count: u64,
    /// Slack of the initial-allocation payoff bound; nonnegative when the
    /// bound holds.
    pub bound_slack: i64,
    /// Allocation events whose check count met or exceeded the theoretical
    /// cap while every observed active-defense set was small enough for
    /// the cap to apply.
    pub check_bound_violations: u64,
}

/// Aggregate over all trials of one policy combination.
#[derive(Clone, Debug, Serialize)]
pub struct OutcomeTally {
    pub trials: usize,
    pub success_capture: usize,
    pub success_timeout: usize,
    pub fail: usize,
    pub errors: usize,
    /// Capture count per trial, in trial order.
    pub capture_numbers: Vec<u64>,
    /// Allocation check count per trial, in trial order.
    pub check_numbers: Vec<u64>,
    /// Payoff-bound slack per trial, in trial order.
    pub bound_slacks: Vec<i64>,
    pub check_bound_violations: u64,
}

impl OutcomeTally {
    fn new() -> Self {
        OutcomeTally {
            trials: 0,
            success_capture: 0,
            success_timeout: 0,
            fail: 0,
            errors: 0,
            capture_numbers: Vec::new(),
            check_numbers: Vec::new(),
            bound_slacks: Vec::new(),
            check_bound_violations: 0,
        }
    }

    fn push(&mut self, result: &TrialResult) {
        self.trials += 1;
        match result.category {
            OutcomeCategory::DefenseSuccessCapture => self.success_capture += 1,
            OutcomeCategory::DefenseSuccessTimeout => self.success_timeout += 1,
            OutcomeCategory::DefenseFail => self.fail += 1,
        }
        self.capture_numbers.push(result.captured);
        self.check_numbers.push(result.check_count);
        self.bound_slacks.push(result.bound_slack);
        self.check_bound_violations += result.check_bound_violations;
    }
}

/// Paired-seed comparison of two defense policies under one attack policy.
#[derive(Clone, Debug, Serialize)]
pub struct PairedComparison {
    pub attack: String,
    pub left: String,
    pub right: String,
    pub trials: usize,
    /// Trials where the left policy captured at least as many attackers.
    pub left_ge_right: usize,
    /// Trials where the left policy captured strictly more.
    pub left_gt_right: usize,
}

/// Whole-bench report; serializing this is the canonical summary artifact.
#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub trials: usize,
    pub base_seed: u64,
    pub tallies: BTreeMap<String, OutcomeTally>,
    pub paired: Vec<PairedComparison>,
    pub trial_errors: Vec<String>,
}

fn categorize(trace: &GameTrace) -> OutcomeCategory {
    if trace.reached > 0 {
        OutcomeCategory::DefenseFail
    } else if trace.timed_out_active > 0 {
        OutcomeCategory::DefenseSuccessTimeout
    } else {
        OutcomeCategory::DefenseSuccessCapture
    }
}

/// Check-number cap per allocation event: `2^(n-1) * m * (1 + m)` with `m`
/// the number of active attackers, valid whenever every observed
/// active-defense set has at most `n` members.
fn check_bound_violations(trace: &GameTrace, dimension: usize) -> u64 {
    let mut violations = 0;
    for record in &trace.allocations {
        if record.max_ads_size as usize > dimension {
            continue;
        }
        let m = record.active_count;
        let bound = (1u64 << (dimension - 1)) * m * (1 + m);
        if record.check_count >= bound && m > 0 {
            violations += 1;
        }
    }
    violations
}

fn trial_result(trial: usize, seed: u64, config: &ScenarioConfig, trace: &GameTrace) -> TrialResult {
    let m = config.attackers.len() as i64;
    let initial = trace.allocations.first();
    let bound =
        m - initial.map(|a| a.gamma).unwrap_or(0) as i64 - initial.map(|a| a.captured_so_far).unwrap_or(0) as i64;
    TrialResult {
        trial,
        seed,
        category: categorize(trace),
        payoff: payoff(trace),
        captured: trace.captured,
        reached: trace.reached,
        timed_out_active: trace.timed_out_active,
        termination: trace.termination,
        check_count: trace.allocation_checks,
        bound_slack: bound - trace.payoff as i64,
        check_bound_violations: check_bound_violations(trace, config.dimension),
    }
}

type TrialRow = (usize, u64, BTreeMap<String, std::result::Result<TrialResult, String>>);

/// Run every trial of the spec on a bounded worker pool and aggregate the
/// results. With an output directory set, each game writes one CSV trace
/// and one JSON summary, and the report lands in `summary.json` plus a
/// human-readable `summary.txt`.
pub fn run_bench(spec: &BenchSpec, out_dir: Option<&Path>, workers: usize) -> Result<BenchReport> {
    spec.validate()?;
    let combos = policy_labels(spec)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;

    let rows: Vec<TrialRow> = pool.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = trial_seed(spec.base_seed, trial);
                let mut per_combo = BTreeMap::new();
                match generate_random_scenario(&spec.template, seed) {
                    Err(e) => {
                        for label in combos.keys() {
                            per_combo.insert(label.clone(), Err(e.to_string()));
                        }
                    }
                    Ok(config) => {
                        for (label, (defense, attack)) in &combos {
                            let entry = run_game(&config, *defense, *attack)
                                .map(|trace| {
                                    if let Some(dir) = out_dir {
                                        let _ = write_trial_artifacts(
                                            dir, trial, label, &config, &trace,
                                        );
                                    }
                                    trial_result(trial, seed, &config, &trace)
                                })
                                .map_err(|e| e.to_string());
                            per_combo.insert(label.clone(), entry);
                        }
                    }
                }
                (trial, seed, per_combo)
            })
            .collect()
    });

    let mut tallies: BTreeMap<String, OutcomeTally> = combos
        .keys()
        .map(|label| (label.clone(), OutcomeTally::new()))
        .collect();
    let mut trial_errors = Vec::new();
    for (trial, _, per_combo) in &rows {
        for (label, entry) in per_combo {
            match entry {
                Ok(result) => tallies.get_mut(label).unwrap().push(result),
                Err(message) => {
                    let tally = tallies.get_mut(label).unwrap();
                    tally.trials += 1;
                    tally.errors += 1;
                    trial_errors.push(format!("trial {trial} [{label}]: {message}"));
                }
            }
        }
    }

    // Paired capture-number comparisons between defense policies that ran
    // under the same attack policy and seeds.
    let mut paired = Vec::new();
    for attack in &spec.attack_policies {
        for (i, left) in spec.defense_policies.iter().enumerate() {
            for right in spec.defense_policies.iter().skip(i + 1) {
                let left_label = format!("{left}-{attack}");
                let right_label = format!("{right}-{attack}");
                let mut comparison = PairedComparison {
                    attack: attack.clone(),
                    left: left.clone(),
                    right: right.clone(),
                    trials: 0,
                    left_ge_right: 0,
                    left_gt_right: 0,
                };
                for (_, _, per_combo) in &rows {
                    if let (Some(Ok(l)), Some(Ok(r))) =
                        (per_combo.get(&left_label), per_combo.get(&right_label))
                    {
                        comparison.trials += 1;
                        if l.captured >= r.captured {
                            comparison.left_ge_right += 1;
                        }
                        if l.captured > r.captured {
                            comparison.left_gt_right += 1;
                        }
                    }
                }
                if comparison.trials > 0 {
                    paired.push(comparison);
                }
            }
        }
    }

    let report = BenchReport {
        trials: spec.trials,
        base_seed: spec.base_seed,
        tallies,
        paired,
        trial_errors,
    };
    if let Some(dir) = out_dir {
        fs::write(dir.join("summary.json"), serde_json::to_vec_pretty(&report)?)?;
        fs::write(dir.join("summary.txt"), render_table(&report))?;
    }
    Ok(report)
}

fn write_trial_artifacts(
    dir: &Path,
    trial: usize,
    label: &str,
    config: &ScenarioConfig,
    trace: &GameTrace,
) -> Result<()> {
    let trial_dir = dir.join(format!("trial_{trial:04}"));
    fs::create_dir_all(&trial_dir)?;
    let mut csv = Vec::new();
    write_trace_csv(trace, config, &mut csv)?;
    fs::write(trial_dir.join(format!("{label}.csv")), csv)?;
    let summary = summarize(trace, config);
    fs::write(
        trial_dir.join(format!("{label}.json")),
        serde_json::to_vec_pretty(&summary)?,
    )?;
    Ok(())
}

fn mean_u64(values: &[u64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<u64>() as f64 / values.len() as f64
    }
}

/// Human-readable summary table.
pub fn render_table(report: &BenchReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{} trials, base seed {}\n\n",
        report.trials, report.base_seed
    ));
    out.push_str(&format!(
        "{:<22} {:>8} {:>8} {:>8} {:>7} {:>12} {:>12} {:>10}\n",
        "policy", "capture", "timeout", "fail", "errors", "mean-captum", "mean-checks", "cap-viols"
    ));
    for (label, tally) in &report.tallies {
        out.push_str(&format!(
            "{:<22} {:>8} {:>8} {:>8} {:>7} {:>12.2} {:>12.1} {:>10}\n",
            label,
            tally.success_capture,
            tally.success_timeout,
            tally.fail,
            tally.errors,
            mean_u64(&tally.capture_numbers),
            mean_u64(&tally.check_numbers),
            tally.check_bound_violations,
        ));
    }
    if !report.paired.is_empty() {
        out.push('\n');
        out.push_str("paired capture-number comparisons (same seeds):\n");
        for p in &report.paired {
            out.push_str(&format!(
                "  {} vs {} under {}: {} >= in {}/{}, strict > in {}/{}\n",
                p.left, p.right, p.attack, p.left, p.left_ge_right, p.trials, p.left_gt_right, p.trials
            ));
        }
    }
    if !report.trial_errors.is_empty() {
        out.push('\n');
        out.push_str("trial errors:\n");
        for e in &report.trial_errors {
            out.push_str(&format!("  {e}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{AgentTemplate, RegionSpec, ScenarioTemplate};

    fn quick_spec(defense: &[&str], attack: &[&str], trials: usize) -> BenchSpec {
        BenchSpec {
            template: ScenarioTemplate {
                dimension: 2,
                domain: RegionSpec::Box {
                    lo: vec![-5.0, -5.0],
                    hi: vec![5.0, 5.0],
                },
                target: RegionSpec::Ball {
                    center: vec![0.0, 0.0],
                    radius: 1.0,
                },
                defenders: AgentTemplate {
                    count: 2,
                    max_speed: 1.2,
                    capture_radius: 0.5,
                },
                attackers: AgentTemplate {
                    count: 2,
                    max_speed: 1.0,
                    capture_radius: 0.0,
                },
                dt: 0.05,
                allocation_period: 0.25,
                t_max: 12.0,
            },
            trials,
            base_seed: 11,
            defense_policies: defense.iter().map(|s| s.to_string()).collect(),
            attack_policies: attack.iter().map(|s| s.to_string()).collect(),
            out_dir: None,
        }
    }

    #[test]
    fn undefended_straight_line_trials_all_fail() {
        let spec = quick_spec(&["none"], &["straight"], 6);
        let report = run_bench(&spec, None, 1).unwrap();
        let tally = &report.tallies["none-straight"];
        assert_eq!(tally.trials, 6);
        assert_eq!(tally.fail, 6);
        assert_eq!(
            tally.success_capture + tally.success_timeout + tally.fail + tally.errors,
            tally.trials
        );
    }

    #[test]
    fn paired_comparison_uses_identical_seeds() {
        let spec = quick_spec(&["mdea", "initial"], &["straight"], 4);
        let report = run_bench(&spec, None, 1).unwrap();
        assert_eq!(report.paired.len(), 1);
        let p = &report.paired[0];
        assert_eq!(p.trials, 4);
        assert!(p.left_ge_right <= p.trials);
        // Bound slack is nonnegative on every MDEA trial.
        for slack in &report.tallies["mdea-straight"].bound_slacks {
            assert!(*slack >= 0, "negative bound slack {slack}");
        }
    }

    #[test]
    fn rerunning_a_spec_reproduces_the_summary_bytes() {
        let spec = quick_spec(&["mdea"], &["random"], 3);
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        run_bench(&spec, Some(dir_a.path()), 2).unwrap();
        run_bench(&spec, Some(dir_b.path()), 1).unwrap();
        let a = std::fs::read(dir_a.path().join("summary.json")).unwrap();
        let b = std::fs::read(dir_b.path().join("summary.json")).unwrap();
        assert_eq!(a, b);
        assert!(dir_a.path().join("trial_0000/mdea-random.csv").exists());
        assert!(dir_a.path().join("trial_0000/mdea-random.json").exists());
    }

    #[test]
    fn table_rendering_mentions_every_combo() {
        let spec = quick_spec(&["mdea", "none"], &["straight"], 2);
        let report = run_bench(&spec, None, 1).unwrap();
        let table = render_table(&report);
        assert!(table.contains("mdea-straight"));
        assert!(table.contains("none-straight"));
        assert!(table.contains("paired capture-number"));
    }
}
