//! Configuration files and randomized scenario generation.
//!
//! Two JSON document kinds share one loader: a scenario file describes a
//! single game instance (explicit agent positions), and a bench file wraps
//! a scenario template (agent capabilities, positions sampled per trial)
//! with trial counts, seeds, and a policy matrix. All units are SI.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{AttackPolicy, AttackerSpec, DefensePolicy, DefenderSpec, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{ConstraintAtom, ConvexRegion};
use crate::vec::Vector;

/// Declarative region description used by the JSON schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionSpec {
    /// Axis-aligned box `lo <= q <= hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Euclidean ball; `radius: 0` makes a point target.
    Ball { center: Vec<f64>, radius: f64 },
    /// Halfspace `normal . q + offset <= 0`.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// Infinite cylinder along coordinate `axis` (3D scenarios).
    Cylinder {
        axis: usize,
        center: Vec<f64>,
        radius: f64,
    },
    /// Intersection of the listed parts.
    Intersection { parts: Vec<RegionSpec> },
}

impl RegionSpec {
    pub fn build(&self, dimension: usize) -> Result<ConvexRegion> {
        match self {
            RegionSpec::Box { lo, hi } => {
                ConvexRegion::bounding_box(&Vector::new(lo)?, &Vector::new(hi)?).and_then(|r| {
                    if r.dim() != dimension {
                        Err(Error::config("box dimension mismatch"))
                    } else {
                        Ok(r)
                    }
                })
            }
            RegionSpec::Ball { center, radius } => {
                if *radius < 0.0 {
                    return Err(Error::config("ball radius must be nonnegative"));
                }
                let center = Vector::new(center)?;
                center.check_dim(dimension)?;
                Ok(ConvexRegion::ball(center, *radius))
            }
            RegionSpec::Halfspace { normal, offset } => {
                let normal = Vector::new(normal)?;
                normal.check_dim(dimension)?;
                ConvexRegion::from_atoms(dimension, vec![ConstraintAtom::affine(normal, *offset)])
            }
            RegionSpec::Cylinder {
                axis,
                center,
                radius,
            } => {
                if *axis >= dimension {
                    return Err(Error::config(format!(
                        "cylinder axis {axis} out of range for dimension {dimension}"
                    )));
                }
                if *radius < 0.0 {
                    return Err(Error::config("cylinder radius must be nonnegative"));
                }
                let center = Vector::new(center)?;
                if center.dim() != dimension - 1 {
                    return Err(Error::config(
                        "cylinder center must have one entry per non-axis coordinate",
                    ));
                }
                ConvexRegion::from_atoms(
                    dimension,
                    vec![ConstraintAtom::AxisCylinder {
                        axis: *axis,
                        center,
                        radius: *radius,
                    }],
                )
            }
            RegionSpec::Intersection { parts } => {
                let mut region = ConvexRegion::all(dimension);
                for part in parts {
                    region = region.intersect(&part.build(dimension)?)?;
                }
                Ok(region)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DefenderFile {
    pub position: Vec<f64>,
    pub max_speed: f64,
    pub capture_radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackerFile {
    pub position: Vec<f64>,
    pub max_speed: f64,
}

fn default_dt() -> f64 {
    0.01
}
fn default_allocation_period() -> f64 {
    0.1
}
fn default_t_max() -> f64 {
    120.0
}

/// JSON schema of one explicit scenario.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub dimension: usize,
    pub domain: RegionSpec,
    pub target: RegionSpec,
    pub defenders: Vec<DefenderFile>,
    pub attackers: Vec<AttackerFile>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_allocation_period")]
    pub allocation_period: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl ScenarioFile {
    pub fn build(&self) -> Result<ScenarioConfig> {
        let config = ScenarioConfig {
            dimension: self.dimension,
            domain: self.domain.build(self.dimension)?,
            target: self.target.build(self.dimension)?,
            defenders: self
                .defenders
                .iter()
                .map(|d| {
                    Ok(DefenderSpec {
                        position: Vector::new(&d.position)?,
                        max_speed: d.max_speed,
                        capture_radius: d.capture_radius,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            attackers: self
                .attackers
                .iter()
                .map(|a| {
                    Ok(AttackerSpec {
                        position: Vector::new(&a.position)?,
                        max_speed: a.max_speed,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            dt: self.dt,
            allocation_period: self.allocation_period,
            t_max: self.t_max,
            rng_seed: self.rng_seed,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Agent capabilities for a randomized trial; positions are sampled.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgentTemplate {
    pub count: usize,
    pub max_speed: f64,
    /// Defender-only; ignored for attackers.
    #[serde(default)]
    pub capture_radius: f64,
}

/// JSON schema of one scenario template: everything a trial needs except
/// positions.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTemplate {
    pub dimension: usize,
    pub domain: RegionSpec,
    pub target: RegionSpec,
    pub defenders: AgentTemplate,
    pub attackers: AgentTemplate,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_allocation_period")]
    pub allocation_period: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
}

fn default_trials() -> usize {
    100
}

/// JSON schema of one benchmark run: a template, trial count, base seed,
/// and the defense/attack policy matrix to sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub template: ScenarioTemplate,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_defense_policies")]
    pub defense_policies: Vec<String>,
    #[serde(default = "default_attack_policies")]
    pub attack_policies: Vec<String>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn default_defense_policies() -> Vec<String> {
    vec!["mdea".into()]
}
fn default_attack_policies() -> Vec<String> {
    vec!["optimal".into()]
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trial count must be at least 1"));
        }
        for p in &self.defense_policies {
            parse_defense_policy(p)?;
        }
        for p in &self.attack_policies {
            parse_attack_policy(p)?;
        }
        // A template must instantiate cleanly at least for the first seed.
        generate_random_scenario(&self.template, self.base_seed)?;
        Ok(())
    }
}

pub fn parse_defense_policy(name: &str) -> Result<DefensePolicy> {
    match name {
        "mdea" => Ok(DefensePolicy::Mdea),
        "initial" => Ok(DefensePolicy::InitialOnly),
        "none" => Ok(DefensePolicy::None),
        other => Err(Error::config(format!(
            "unknown defense policy {other:?} (expected mdea|initial|none)"
        ))),
    }
}

pub fn parse_attack_policy(name: &str) -> Result<AttackPolicy> {
    match name {
        "optimal" => Ok(AttackPolicy::Optimal),
        "straight" => Ok(AttackPolicy::StraightLine),
        "random" => Ok(AttackPolicy::Random),
        other => Err(Error::config(format!(
            "unknown attack policy {other:?} (expected optimal|straight|random)"
        ))),
    }
}

pub fn defense_policy_name(policy: DefensePolicy) -> &'static str {
    match policy {
        DefensePolicy::Mdea => "mdea",
        DefensePolicy::InitialOnly => "initial",
        DefensePolicy::None => "none",
    }
}

pub fn attack_policy_name(policy: AttackPolicy) -> &'static str {
    match policy {
        AttackPolicy::Optimal => "optimal",
        AttackPolicy::StraightLine => "straight",
        AttackPolicy::Random => "random",
    }
}

/// Either document kind, distinguished by shape.
pub enum ConfigFile {
    Scenario(Box<ScenarioConfig>),
    Bench(Box<BenchSpec>),
}

/// Parse and validate a configuration file, accepting either a scenario or
/// a bench spec.
pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{} is not valid JSON: {e}", path.display())))?;
    if value.get("template").is_some() {
        let spec: BenchSpec = serde_json::from_value(value)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(ConfigFile::Bench(Box::new(spec)))
    } else {
        let file: ScenarioFile = serde_json::from_value(value)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Ok(ConfigFile::Scenario(Box::new(file.build()?)))
    }
}

/// Load a path that must contain a single scenario.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    match load_config(path)? {
        ConfigFile::Scenario(c) => Ok(*c),
        ConfigFile::Bench(_) => Err(Error::config(format!(
            "{} is a bench spec; a single scenario is required here",
            path.display()
        ))),
    }
}

/// Uniform rejection sampler inside a region, bounded by the region's
/// axis-aligned envelope.
fn sample_in_region(
    rng: &mut ChaCha20Rng,
    region: &ConvexRegion,
    dimension: usize,
    attempts: &mut usize,
    cap: usize,
) -> Result<Vector> {
    let (lo, hi) = region_envelope(region, dimension)?;
    loop {
        *attempts += 1;
        if *attempts > cap {
            return Err(Error::config(format!(
                "rejection sampling exceeded {cap} attempts; the template \
                 leaves too little room for a clean start"
            )));
        }
        let mut q = Vector::zeros(dimension);
        for k in 0..dimension {
            q[k] = rng.gen_range(lo[k]..hi[k]);
        }
        if region.contains(&q, 0.0)? {
            return Ok(q);
        }
    }
}

/// Conservative axis-aligned envelope of a region from its affine, ball,
/// and cylinder atoms.
fn region_envelope(region: &ConvexRegion, dimension: usize) -> Result<(Vector, Vector)> {
    let mut lo = Vector::zeros(dimension);
    let mut hi = Vector::zeros(dimension);
    for k in 0..dimension {
        lo[k] = f64::NEG_INFINITY;
        hi[k] = f64::INFINITY;
    }
    for atom in region.atoms() {
        match atom {
            ConstraintAtom::Affine { normal, offset } => {
                let mut axis = None;
                for k in 0..dimension {
                    if normal[k] != 0.0 {
                        if axis.is_some() {
                            axis = None;
                            break;
                        }
                        axis = Some(k);
                    }
                }
                if let Some(k) = axis {
                    let bound = -offset / normal[k];
                    if normal[k] > 0.0 {
                        hi[k] = hi[k].min(bound);
                    } else {
                        lo[k] = lo[k].max(bound);
                    }
                }
            }
            ConstraintAtom::Ball { center, radius } => {
                for k in 0..dimension {
                    lo[k] = lo[k].max(center[k] - radius);
                    hi[k] = hi[k].min(center[k] + radius);
                }
            }
            ConstraintAtom::AxisCylinder {
                axis,
                center,
                radius,
            } => {
                let mut c = 0;
                for k in 0..dimension {
                    if k != *axis {
                        lo[k] = lo[k].max(center[c] - radius);
                        hi[k] = hi[k].min(center[c] + radius);
                        c += 1;
                    }
                }
            }
            ConstraintAtom::CaptureFrontier { .. } => {}
        }
    }
    for k in 0..dimension {
        if !lo[k].is_finite() || !hi[k].is_finite() || lo[k] >= hi[k] {
            return Err(Error::config(
                "region must be bounded with positive volume to sample positions",
            ));
        }
    }
    Ok((lo, hi))
}

/// Cap on total rejection attempts per sampled scenario.
const SAMPLE_ATTEMPT_CAP: usize = 10_000;

/// Sample one scenario from a template: positions uniform in the domain,
/// resampled until the clean-start invariants hold. Deterministic in the
/// seed.
pub fn generate_random_scenario(template: &ScenarioTemplate, seed: u64) -> Result<ScenarioConfig> {
    let dimension = template.dimension;
    let domain = template.domain.build(dimension)?;
    let target = template.target.build(dimension)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut attempts = 0usize;

    let mut defenders = Vec::with_capacity(template.defenders.count);
    for _ in 0..template.defenders.count {
        let position = sample_in_region(&mut rng, &domain, dimension, &mut attempts, SAMPLE_ATTEMPT_CAP)?;
        defenders.push(DefenderSpec {
            position,
            max_speed: template.defenders.max_speed,
            capture_radius: template.defenders.capture_radius,
        });
    }
    let mut attackers = Vec::with_capacity(template.attackers.count);
    for _ in 0..template.attackers.count {
        loop {
            attempts += 1;
            if attempts > SAMPLE_ATTEMPT_CAP {
                return Err(Error::config(format!(
                    "rejection sampling exceeded {SAMPLE_ATTEMPT_CAP} attempts; \
                     the template leaves too little room for a clean start"
                )));
            }
            let position =
                sample_in_region(&mut rng, &domain, dimension, &mut attempts, SAMPLE_ATTEMPT_CAP)?;
            let clear_of_captures = defenders
                .iter()
                .all(|d| position.distance(&d.position) >= d.capture_radius);
            if clear_of_captures && !target.contains(&position, 0.0)? {
                attackers.push(AttackerSpec {
                    position,
                    max_speed: template.attackers.max_speed,
                });
                break;
            }
        }
    }

    let config = ScenarioConfig {
        dimension,
        domain,
        target,
        defenders,
        attackers,
        dt: template.dt,
        allocation_period: template.allocation_period,
        t_max: template.t_max,
        rng_seed: seed,
    };
    config.validate()?;
    Ok(config)
}

/// Stable per-trial seed derivation (splitmix64 over the base seed and the
/// trial index).
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    let mut z = base
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add((trial as u64).wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Canonical JSON map of policy-combination labels, used by output files.
pub fn policy_labels(spec: &BenchSpec) -> Result<BTreeMap<String, (DefensePolicy, AttackPolicy)>> {
    let mut out = BTreeMap::new();
    for d in &spec.defense_policies {
        for a in &spec.attack_policies {
            out.insert(
                format!("{d}-{a}"),
                (parse_defense_policy(d)?, parse_attack_policy(a)?),
            );
        }
    }
    Ok(out)
}
