//! Defense coordination and allocation for multiplayer reach-avoid games.
//!
//! A team of defenders guards a convex target set inside a bounded convex
//! domain against a team of attackers. The library builds the attacker's
//! safe-reachable set as an intersection of smooth convex constraints,
//! measures the squared distance between that set and the target with a
//! small dense interior-point solver, and turns the solver's primal point
//! and multipliers into defender velocity commands. On top of the
//! single-attack layer sit an exact assignment ILP, a hierarchical
//! restriction heuristic, and a monotonic allocation update rule, plus a
//! discrete-time game engine and a randomized benchmark harness.
//!
//! Entry points:
//! - [`geometry`]: constraint atoms, convex regions, safe-reachable sets.
//! - [`solver`]: the two parametric convex programs and KKT extraction.
//! - [`coordination`]: dual-mode defense coordination for one coalition
//!   against one attacker, and the attacker strategies used in benchmarks.
//! - [`allocation`]: coalition-to-attacker assignment (exact ILP,
//!   hierarchical heuristic, monotonic enhancement).
//! - [`engine`]: the discrete-time game loop and trace recording.
//! - [`scenario`], [`bench`], [`plot`]: configuration files, randomized
//!   trials, aggregate metrics, and SVG region plots.
//!
//! Runnable demonstrations live under `examples/`; the `reach-avoid` binary
//! exposes the same capabilities as `simulate`, `bench`, `srs`, and
//! `verify` subcommands.

pub mod allocation;
pub mod bench;
pub mod coordination;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod plot;
pub mod scenario;
pub mod solver;
pub mod vec;

pub use error::Error;
pub use vec::Vector;

/// Feasibility threshold on the single-attack objective: a coalition-attacker
/// pair counts as defense-winning only when the squared distance between the
/// safe-reachable set and the target exceeds this margin. One decade above
/// the solver's KKT tolerance.
pub const EPS_WIN: f64 = 1e-7;

/// Default membership tolerance for convex regions.
pub const EPS_MEMBERSHIP: f64 = 1e-9;

/// Default absolute threshold for deciding which constraints are active at a
/// solver optimum.
pub const EPS_ACTIVE: f64 = 1e-6;
