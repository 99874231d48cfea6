//! Dense log-barrier interior-point solver for the two parametric convex
//! programs behind defense coordination.
//!
//! Program 1 (`solve_min_distance`) minimizes the squared distance between
//! two convex regions over a pair of points; program 2 (`solve_projection`)
//! projects a point onto one region. Both return the optimal value, primal
//! point(s), per-constraint Lagrange multipliers, and the active set.
//!
//! The solver is a primal log-barrier method with a damped Newton inner
//! loop: the barrier weight starts at 1 and shrinks by factors of 10, and a
//! phase-1 epigraph program (minimize the max constraint value) supplies a
//! strictly feasible start. Multipliers are recovered as
//! `mu / (-constraint value)` at the final iterate, then sharpened by one
//! active-set Newton polish on the exact KKT equations, which pushes the
//! stationarity residual to machine precision where the raw barrier iterate
//! is limited by cancellation in near-active constraint values.
//!
//! Regions with empty interior (point targets from zero-radius balls,
//! segment or facet targets from touching halfspace pairs) defeat a naive
//! barrier, so a presolve pass first converts such structure into an affine
//! equality manifold and runs the barrier in the manifold coordinates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ConstraintAtom, ConvexRegion};
use crate::vec::Vector;
use crate::EPS_ACTIVE;

/// Maximum reduced variable count: two 3D blocks, plus one epigraph slack.
const MAX_VARS: usize = 8;

/// Final barrier weight; also the multiplier recovery scale.
const MU_FINAL: f64 = 1e-9;

/// Phase-1 decides a region is empty when its best max constraint value
/// stays above this threshold.
const INFEASIBLE_MARGIN: f64 = 1e-9;

/// A phase-1 point with margin at or below this is accepted as strictly
/// feasible without further centering.
const INTERIOR_MARGIN: f64 = -1e-6;

/// Tolerance used when presolve matches opposing halfspaces.
const PRESOLVE_TOL: f64 = 1e-9;

/// Barrier multipliers at least this large flag a constraint as active for
/// the polish step.
const POLISH_ACTIVE_LAMBDA: f64 = 1e-5;

const MAX_NEWTON_PER_STAGE: usize = 30;
const MAX_BACKTRACKS: usize = 40;

/// Counts invocations of the minimum-distance program. One increment per
/// `solve_min_distance` call; projections do not count. This is the "check
/// number" efficiency metric of the allocation layer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CheckCounter {
    count: u64,
}

impl CheckCounter {
    pub fn new() -> Self {
        CheckCounter { count: 0 }
    }

    pub fn increment(&mut self) {
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Outcome of one parametric convex program.
///
/// `multipliers` and `constraint_values` are aligned with the constraint
/// atoms: for the minimum-distance program the first region's atoms come
/// first, followed by the second region's atoms; for the projection program
/// they follow the region's atom order.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub value: f64,
    pub primal_q: Vector,
    pub primal_qtilde: Option<Vector>,
    pub multipliers: Vec<f64>,
    pub constraint_values: Vec<f64>,
    pub active_set: Vec<usize>,
    pub status: SolveStatus,
    pub iterations: usize,
}

/// Optional warm starts; used by determinism and uniqueness tests. Starts
/// need not be feasible — phase-1 repairs them.
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveOptions {
    pub start_a: Option<Vector>,
    pub start_b: Option<Vector>,
}

/// Constraint indices whose absolute value at the primal point is at most
/// `eps_active`.
pub fn active_set(result: &SolveResult, eps_active: f64) -> Vec<usize> {
    result
        .constraint_values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= eps_active)
        .map(|(i, _)| i)
        .collect()
}

/// The program a [`SolveResult`] came from, for KKT residual evaluation.
pub enum KktProblem<'a> {
    MinDistance {
        region_a: &'a ConvexRegion,
        region_b: &'a ConvexRegion,
    },
    Projection {
        point: Vector,
        region: &'a ConvexRegion,
    },
}

// ---------------------------------------------------------------------------
// Presolve: equality detection and manifold coordinates
// ---------------------------------------------------------------------------

/// An opposing pair of affine atoms whose boundaries touch, pinned to an
/// equality during presolve. Kept around to reconstruct nonnegative
/// multipliers for the two original one-sided constraints.
#[derive(Clone, Debug)]
struct EqPair {
    upper: usize,
    lower: usize,
    unit: Vector,
    upper_scale: f64,
    lower_scale: f64,
}

/// A region rewritten as `q = q0 + basis * w` with the surviving inequality
/// atoms listed in `kept`. `basis` is orthonormal; an empty basis means the
/// region is the single point `q0`.
#[derive(Clone, Debug)]
struct Reduced {
    q0: Vector,
    basis: Vec<Vector>,
    kept: Vec<usize>,
    pairs: Vec<EqPair>,
    empty: bool,
}

fn presolve(region: &ConvexRegion) -> Reduced {
    let n = region.dim();
    let atoms = region.atoms();
    let mut consumed = vec![false; atoms.len()];
    let mut rows: Vec<(Vector, f64)> = Vec::new();
    let mut pairs = Vec::new();

    // Zero-radius balls and cylinders fix coordinates outright.
    for (i, atom) in atoms.iter().enumerate() {
        match atom {
            ConstraintAtom::Ball { center, radius } if *radius == 0.0 => {
                for k in 0..n {
                    let mut u = Vector::zeros(n);
                    u[k] = 1.0;
                    rows.push((u, center[k]));
                }
                consumed[i] = true;
            }
            ConstraintAtom::AxisCylinder {
                axis,
                center,
                radius,
            } if *radius == 0.0 => {
                let mut c = 0;
                for k in 0..n {
                    if k != *axis {
                        let mut u = Vector::zeros(n);
                        u[k] = 1.0;
                        rows.push((u, center[c]));
                        c += 1;
                    }
                }
                consumed[i] = true;
            }
            _ => {}
        }
    }

    // Opposing halfspace pairs: u.q <= beta_i against u.q >= -beta_j.
    // Touching boundaries pin an equality; a gap empties the region.
    let mut affine: Vec<(usize, Vector, f64, f64)> = Vec::new();
    for (i, atom) in atoms.iter().enumerate() {
        if let ConstraintAtom::Affine { normal, offset } = atom {
            let scale = normal.norm();
            if scale > 0.0 {
                affine.push((i, *normal * (1.0 / scale), -offset / scale, scale));
            }
        }
    }
    for x in 0..affine.len() {
        for y in (x + 1)..affine.len() {
            let (i, ui, bi, si) = (affine[x].0, affine[x].1, affine[x].2, affine[x].3);
            let (j, uj, bj, sj) = (affine[y].0, affine[y].1, affine[y].2, affine[y].3);
            if consumed[i] || consumed[j] {
                continue;
            }
            if ui.dot(&uj) > -1.0 + PRESOLVE_TOL {
                continue;
            }
            // Feasible interval for ui.q is [-bj, bi].
            if -bj > bi + PRESOLVE_TOL {
                return Reduced {
                    q0: Vector::zeros(n),
                    basis: Vec::new(),
                    kept: Vec::new(),
                    pairs: Vec::new(),
                    empty: true,
                };
            }
            if (bi + bj).abs() <= PRESOLVE_TOL {
                rows.push((ui, bi));
                pairs.push(EqPair {
                    upper: i,
                    lower: j,
                    unit: ui,
                    upper_scale: si,
                    lower_scale: sj,
                });
                consumed[i] = true;
                consumed[j] = true;
            }
        }
    }

    let Some((q0, basis)) = solve_equalities(n, &rows) else {
        return Reduced {
            q0: Vector::zeros(n),
            basis: Vec::new(),
            kept: Vec::new(),
            pairs,
            empty: true,
        };
    };

    // Surviving atoms; affine atoms that are constant on the manifold are
    // dropped (or empty the region when violated).
    let mut kept = Vec::new();
    let mut empty = false;
    for (i, atom) in atoms.iter().enumerate() {
        if consumed[i] {
            continue;
        }
        if let ConstraintAtom::Affine { normal, .. } = atom {
            let reduced_norm_sq: f64 = basis.iter().map(|b| b.dot(normal).powi(2)).sum();
            if reduced_norm_sq <= 1e-24 {
                if atom.value_unchecked(&q0) > INFEASIBLE_MARGIN {
                    empty = true;
                }
                continue;
            }
        }
        kept.push(i);
    }

    // A point region must satisfy every remaining atom at q0.
    if basis.is_empty() && !empty {
        for &i in &kept {
            if atoms[i].value_unchecked(&q0) > INFEASIBLE_MARGIN {
                empty = true;
                break;
            }
        }
    }

    Reduced {
        q0,
        basis,
        kept,
        pairs,
        empty,
    }
}

/// Solve the stacked equality rows `u.q = beta`, returning a particular
/// solution and an orthonormal nullspace basis, or `None` when the rows are
/// inconsistent.
fn solve_equalities(n: usize, rows: &[(Vector, f64)]) -> Option<(Vector, Vec<Vector>)> {
    if rows.is_empty() {
        let mut basis = Vec::with_capacity(n);
        for k in 0..n {
            let mut e = Vector::zeros(n);
            e[k] = 1.0;
            basis.push(e);
        }
        return Some((Vector::zeros(n), basis));
    }

    let m = rows.len();
    let mut a = vec![[0.0f64; 4]; m];
    for (r, (u, beta)) in rows.iter().enumerate() {
        for k in 0..n {
            a[r][k] = u[k];
        }
        a[r][3] = *beta;
    }

    // Forward elimination with partial pivoting.
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row >= m {
            break;
        }
        let mut best = row;
        for r in row..m {
            if a[r][col].abs() > a[best][col].abs() {
                best = r;
            }
        }
        if a[best][col].abs() < 1e-10 {
            continue;
        }
        a.swap(row, best);
        for r in 0..m {
            if r != row && a[r][col].abs() > 0.0 {
                let f = a[r][col] / a[row][col];
                for c in 0..4 {
                    a[r][c] -= f * a[row][c];
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }
    // Inconsistent leftover rows mean contradictory equalities.
    for r in row..m {
        if a[r][3].abs() > 1e-8 {
            return None;
        }
    }

    let mut q0 = Vector::zeros(n);
    for (r, &col) in pivot_cols.iter().enumerate() {
        q0[col] = a[r][3] / a[r][col];
    }

    let mut basis = Vec::new();
    for free in 0..n {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = Vector::zeros(n);
        v[free] = 1.0;
        for (r, &col) in pivot_cols.iter().enumerate() {
            v[col] = -a[r][free] / a[r][col];
        }
        for b in &basis {
            let proj = v.dot(b);
            v = v - *b * proj;
        }
        let norm = v.norm();
        if norm > 1e-12 {
            basis.push(v * (1.0 / norm));
        }
    }
    Some((q0, basis))
}

// ---------------------------------------------------------------------------
// Newton machinery on reduced coordinates
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct Block {
    q0: Vector,
    basis: Vec<Vector>,
    offset: usize,
}

impl Block {
    fn width(&self) -> usize {
        self.basis.len()
    }

    #[inline]
    fn point(&self, w: &[f64; MAX_VARS]) -> Vector {
        let mut q = self.q0;
        for (i, b) in self.basis.iter().enumerate() {
            q += *b * w[self.offset + i];
        }
        q
    }

    fn add_reduced_grad(&self, g: &Vector, scale: f64, out: &mut [f64; MAX_VARS]) {
        for (i, b) in self.basis.iter().enumerate() {
            out[self.offset + i] += scale * b.dot(g);
        }
    }
}

struct Constraint<'a> {
    atom: &'a ConstraintAtom,
    block_id: usize,
    /// Relaxation applied when a region is feasible but has no strict
    /// interior: the barrier sees `value - shift <= 0`.
    shift: f64,
    /// Extra epigraph variable subtracted from the value (phase-1 only).
    epigraph_var: Option<usize>,
}

impl Constraint<'_> {
    #[inline]
    fn value(&self, points: &[Vector; 2], w: &[f64; MAX_VARS]) -> f64 {
        let mut v = self.atom.value_unchecked(&points[self.block_id]) - self.shift;
        if let Some(s) = self.epigraph_var {
            v -= w[s];
        }
        v
    }

    fn grad_into(&self, blocks: &[Block], points: &[Vector; 2], out: &mut [f64; MAX_VARS]) {
        let g = self.atom.gradient_unchecked(&points[self.block_id]);
        let block = &blocks[self.block_id];
        for i in 0..block.width() {
            out[block.offset + i] = block.basis[i].dot(&g);
        }
        if let Some(s) = self.epigraph_var {
            out[s] = -1.0;
        }
    }

    /// Reduced Hessian of the atom within its block; returns the block's
    /// variable offset and a dense k-by-k submatrix.
    fn hessian(&self, blocks: &[Block], points: &[Vector; 2]) -> (usize, [[f64; 3]; 3]) {
        let h = self.atom.hessian_unchecked(&points[self.block_id]);
        let block = &blocks[self.block_id];
        let k = block.width();
        let mut out = [[0.0; 3]; 3];
        for i in 0..k {
            for j in 0..k {
                let mut acc = 0.0;
                for r in 0..h.dim {
                    for c in 0..h.dim {
                        acc += block.basis[i][r] * h.data[r][c] * block.basis[j][c];
                    }
                }
                out[i][j] = acc;
            }
        }
        (block.offset, out)
    }
}

enum Objective {
    /// Squared distance between block 0 and block 1 points.
    MinDistance,
    /// Squared distance from block 0's point to a fixed anchor.
    Projection { anchor: Vector },
    /// Phase-1 epigraph value `w[svar]`.
    Epigraph { svar: usize },
}

struct Problem<'a> {
    nvars: usize,
    blocks: Vec<Block>,
    constraints: Vec<Constraint<'a>>,
    objective: Objective,
}

impl Problem<'_> {
    #[inline]
    fn points(&self, w: &[f64; MAX_VARS]) -> [Vector; 2] {
        let p0 = self.blocks[0].point(w);
        let p1 = if self.blocks.len() > 1 {
            self.blocks[1].point(w)
        } else {
            p0
        };
        [p0, p1]
    }

    fn objective_value(&self, points: &[Vector; 2], w: &[f64; MAX_VARS]) -> f64 {
        match &self.objective {
            Objective::MinDistance => (points[0] - points[1]).norm_squared(),
            Objective::Projection { anchor } => (points[0] - *anchor).norm_squared(),
            Objective::Epigraph { svar } => w[*svar],
        }
    }

    fn objective_grad(&self, points: &[Vector; 2], out: &mut [f64; MAX_VARS]) {
        match &self.objective {
            Objective::MinDistance => {
                let diff = points[0] - points[1];
                self.blocks[0].add_reduced_grad(&diff, 2.0, out);
                self.blocks[1].add_reduced_grad(&diff, -2.0, out);
            }
            Objective::Projection { anchor } => {
                let diff = points[0] - *anchor;
                self.blocks[0].add_reduced_grad(&diff, 2.0, out);
            }
            Objective::Epigraph { svar } => out[*svar] = 1.0,
        }
    }

    fn objective_hess(&self, h: &mut [[f64; MAX_VARS]; MAX_VARS]) {
        match &self.objective {
            Objective::MinDistance => {
                let (a, b) = (&self.blocks[0], &self.blocks[1]);
                for i in 0..a.width() {
                    h[a.offset + i][a.offset + i] += 2.0;
                }
                for i in 0..b.width() {
                    h[b.offset + i][b.offset + i] += 2.0;
                }
                for i in 0..a.width() {
                    for j in 0..b.width() {
                        let v = -2.0 * a.basis[i].dot(&b.basis[j]);
                        h[a.offset + i][b.offset + j] += v;
                        h[b.offset + j][a.offset + i] += v;
                    }
                }
            }
            Objective::Projection { .. } => {
                for i in 0..self.blocks[0].width() {
                    let k = self.blocks[0].offset + i;
                    h[k][k] += 2.0;
                }
            }
            Objective::Epigraph { .. } => {}
        }
    }

    fn barrier_value(&self, w: &[f64; MAX_VARS], mu: f64) -> Option<f64> {
        let points = self.points(w);
        let mut total = self.objective_value(&points, w);
        for c in &self.constraints {
            let v = c.value(&points, w);
            if v >= 0.0 {
                return None;
            }
            total -= mu * (-v).ln();
        }
        Some(total)
    }
}

fn cholesky_solve(
    n: usize,
    h: &[[f64; MAX_VARS]; MAX_VARS],
    rhs: &[f64; MAX_VARS],
) -> Option<[f64; MAX_VARS]> {
    let mut l = [[0.0f64; MAX_VARS]; MAX_VARS];
    for j in 0..n {
        let mut diag = h[j][j];
        for k in 0..j {
            diag -= l[j][k] * l[j][k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        l[j][j] = diag.sqrt();
        for i in (j + 1)..n {
            let mut v = h[i][j];
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            l[i][j] = v / l[j][j];
        }
    }
    let mut y = [0.0f64; MAX_VARS];
    for i in 0..n {
        let mut v = rhs[i];
        for k in 0..i {
            v -= l[i][k] * y[k];
        }
        y[i] = v / l[i][i];
    }
    let mut x = [0.0f64; MAX_VARS];
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in (i + 1)..n {
            v -= l[k][i] * x[k];
        }
        x[i] = v / l[i][i];
    }
    Some(x)
}

/// Gaussian elimination with partial pivoting for the (indefinite) polish
/// KKT system. Sized by `Vec` because the system mixes primal variables
/// with one multiplier per active constraint.
fn lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut best = col;
        for r in (col + 1)..n {
            if a[r][col].abs() > a[best][col].abs() {
                best = r;
            }
        }
        if a[best][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, best);
        b.swap(col, best);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v -= a[i][k] * x[k];
        }
        x[i] = v / a[i][i];
    }
    Some(x)
}

struct StageOutcome {
    converged: bool,
    grad_norm: f64,
    iterations: usize,
}

/// Damped Newton descent on the barrier function for one value of `mu`.
/// `early_exit` short-circuits as soon as the current iterate satisfies
/// the caller's goal (phase-1 uses it to stop once strictly feasible).
fn newton_stage(
    problem: &Problem<'_>,
    w: &mut [f64; MAX_VARS],
    mu: f64,
    tol: f64,
    early_exit: Option<&dyn Fn(&[f64; MAX_VARS]) -> bool>,
) -> StageOutcome {
    let n = problem.nvars;
    let mut grad_norm = f64::INFINITY;
    let mut stalls = 0usize;
    for it in 0..MAX_NEWTON_PER_STAGE {
        if let Some(exit) = early_exit {
            if exit(w) {
                return StageOutcome {
                    converged: true,
                    grad_norm,
                    iterations: it,
                };
            }
        }
        let points = problem.points(w);
        let mut grad = [0.0f64; MAX_VARS];
        problem.objective_grad(&points, &mut grad);
        let mut hess = [[0.0f64; MAX_VARS]; MAX_VARS];
        problem.objective_hess(&mut hess);

        let mut feasible = true;
        for c in &problem.constraints {
            let v = c.value(&points, w);
            if v >= 0.0 {
                feasible = false;
                break;
            }
            let slack = -v;
            let mut cg = [0.0f64; MAX_VARS];
            c.grad_into(&problem.blocks, &points, &mut cg);
            let gs = mu / slack;
            for i in 0..n {
                grad[i] += gs * cg[i];
            }
            let hs = mu / (slack * slack);
            for i in 0..n {
                if cg[i] == 0.0 {
                    continue;
                }
                let row = hs * cg[i];
                for j in 0..n {
                    hess[i][j] += row * cg[j];
                }
            }
            let (off, ch) = c.hessian(&problem.blocks, &points);
            let k = problem.blocks[c.block_id].width();
            for i in 0..k {
                for j in 0..k {
                    hess[off + i][off + j] += gs * ch[i][j];
                }
            }
        }
        if !feasible {
            return StageOutcome {
                converged: false,
                grad_norm,
                iterations: it,
            };
        }

        grad_norm = grad.iter().take(n).map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm <= tol {
            return StageOutcome {
                converged: true,
                grad_norm,
                iterations: it,
            };
        }

        let mut rhs = [0.0f64; MAX_VARS];
        for i in 0..n {
            rhs[i] = -grad[i];
        }
        let mut ridge = 0.0;
        let step = loop {
            let mut hr = hess;
            if ridge > 0.0 {
                for i in 0..n {
                    hr[i][i] += ridge;
                }
            }
            if let Some(d) = cholesky_solve(n, &hr, &rhs) {
                break Some(d);
            }
            ridge = if ridge == 0.0 { 1e-12 } else { ridge * 100.0 };
            if ridge > 1e3 {
                break None;
            }
        };
        let Some(step) = step else {
            return StageOutcome {
                converged: grad_norm <= tol,
                grad_norm,
                iterations: it,
            };
        };

        let slope: f64 = (0..n).map(|i| grad[i] * step[i]).sum();
        let base = problem
            .barrier_value(w, mu)
            .expect("current iterate is strictly feasible");
        // The epsilon term keeps the search from rejecting steps whose
        // barrier decrement falls below f64 granularity of the objective.
        let fuzz = 1e-14 * base.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut wt = *w;
            for i in 0..n {
                wt[i] += t * step[i];
            }
            if let Some(bt) = problem.barrier_value(&wt, mu) {
                if bt <= base + 1e-4 * t * slope + fuzz {
                    *w = wt;
                    accepted = Some(bt);
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            None => {
                return StageOutcome {
                    converged: grad_norm <= tol,
                    grad_norm,
                    iterations: it,
                };
            }
            Some(bt) => {
                // Two consecutive iterations without measurable decrease
                // mean the stage has hit the floating-point floor.
                if base - bt <= fuzz {
                    stalls += 1;
                    if stalls >= 2 {
                        return StageOutcome {
                            converged: grad_norm <= tol,
                            grad_norm,
                            iterations: it,
                        };
                    }
                } else {
                    stalls = 0;
                }
            }
        }
    }
    StageOutcome {
        converged: grad_norm <= tol * 10.0,
        grad_norm,
        iterations: MAX_NEWTON_PER_STAGE,
    }
}

/// Barrier stages from `mu = 1` down to [`MU_FINAL`], factor 10.
fn barrier_schedule() -> impl Iterator<Item = f64> {
    (0..=9).map(|k| 10f64.powi(-k))
}

/// Inner Newton tolerance per stage. Loose on purpose: the barrier's job is
/// to track the central path and identify the active set; the final
/// precision comes from the KKT polish.
fn stage_tol(mu: f64) -> f64 {
    (mu * 1e-2).max(1e-7)
}

enum Phase1 {
    Interior([f64; MAX_VARS]),
    /// Feasible but without usable interior; carries the point and the
    /// margin (best max constraint value found).
    Thin([f64; MAX_VARS], f64),
    Empty,
}

/// Candidate interior points read off the atoms themselves: ball and
/// cylinder centers, frontier attacker positions, and the midpoint of any
/// axis-aligned box. One of these sits inside almost every region this
/// crate builds, which lets phase-1 finish without Newton work.
fn anchor_candidates(dim: usize, atoms: &[&ConstraintAtom]) -> Vec<Vector> {
    let mut anchors = Vec::new();
    let mut lo = [f64::NEG_INFINITY; crate::vec::MAX_DIM];
    let mut hi = [f64::INFINITY; crate::vec::MAX_DIM];
    let mut has_box = false;
    for atom in atoms {
        match atom {
            ConstraintAtom::Ball { center, .. } => anchors.push(*center),
            ConstraintAtom::CaptureFrontier { attacker, .. } => anchors.push(*attacker),
            ConstraintAtom::AxisCylinder { axis, center, .. } => {
                let mut p = Vector::zeros(dim);
                let mut c = 0;
                for k in 0..dim {
                    if k != *axis {
                        p[k] = center[c];
                        c += 1;
                    }
                }
                anchors.push(p);
            }
            ConstraintAtom::Affine { normal, offset } => {
                let mut axis = None;
                for k in 0..dim {
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
                    has_box = true;
                }
            }
        }
    }
    if has_box {
        let mut mid = Vector::zeros(dim);
        for k in 0..dim {
            let l = if lo[k].is_finite() { lo[k] } else { hi[k].min(0.0) };
            let h = if hi[k].is_finite() { hi[k] } else { lo[k].max(0.0) };
            if l.is_finite() && h.is_finite() {
                mid[k] = 0.5 * (l + h);
            }
        }
        anchors.push(mid);
    }
    anchors
}

/// Find a strictly feasible point for the block's kept atoms, starting from
/// `w_start`, by minimizing the max constraint value through an epigraph
/// barrier.
fn phase1(block: &Block, atoms: &[&ConstraintAtom], w_start: [f64; MAX_VARS]) -> (Phase1, usize) {
    let k = block.width();
    let mut local = block.clone();
    local.offset = 0;
    let svar = k;
    let constraints: Vec<Constraint<'_>> = atoms
        .iter()
        .map(|atom| Constraint {
            atom,
            block_id: 0,
            shift: 0.0,
            epigraph_var: Some(svar),
        })
        .collect();
    let problem = Problem {
        nvars: k + 1,
        blocks: vec![local],
        constraints,
        objective: Objective::Epigraph { svar },
    };

    let margin_at = |w: &[f64; MAX_VARS]| {
        let q = problem.blocks[0].point(w);
        atoms
            .iter()
            .map(|a| a.value_unchecked(&q))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    // Best of: the caller's start, the manifold origin, and the atoms' own
    // anchor points.
    let mut w = [0.0f64; MAX_VARS];
    w[..k].copy_from_slice(&w_start[..k]);
    let mut best_margin = margin_at(&w);
    let try_candidate = |cand: [f64; MAX_VARS], w: &mut [f64; MAX_VARS], best: &mut f64| {
        let m = margin_at(&cand);
        if m < *best {
            *best = m;
            *w = cand;
        }
    };
    if best_margin > INTERIOR_MARGIN {
        try_candidate([0.0; MAX_VARS], &mut w, &mut best_margin);
    }
    if best_margin > INTERIOR_MARGIN {
        let block0 = &problem.blocks[0];
        for anchor in anchor_candidates(block0.q0.dim(), atoms) {
            let mut cand = [0.0f64; MAX_VARS];
            for (i, b) in block0.basis.iter().enumerate() {
                cand[i] = b.dot(&(anchor - block0.q0));
            }
            try_candidate(cand, &mut w, &mut best_margin);
        }
    }
    if best_margin <= INTERIOR_MARGIN {
        return (Phase1::Interior(w), 0);
    }
    w[svar] = best_margin + 1.0;

    let strictly_feasible = |w: &[f64; MAX_VARS]| {
        let q = problem.blocks[0].point(w);
        atoms
            .iter()
            .all(|a| a.value_unchecked(&q) <= INTERIOR_MARGIN)
    };

    let mut iterations = 0;
    for mu in barrier_schedule() {
        let outcome = newton_stage(&problem, &mut w, mu, stage_tol(mu), Some(&strictly_feasible));
        iterations += outcome.iterations;
        if strictly_feasible(&w) {
            return (Phase1::Interior(w), iterations);
        }
    }
    let margin = margin_at(&w);
    if margin > INFEASIBLE_MARGIN {
        (Phase1::Empty, iterations)
    } else {
        (Phase1::Thin(w, margin), iterations)
    }
}

/// One active-set Newton polish on the exact KKT equations. The barrier
/// identifies which constraints bind; this solves stationarity plus
/// `g_i = 0` for those constraints to machine precision, eliminating the
/// cancellation noise that limits the raw barrier iterate.
///
/// Returns the polished iterate and one multiplier per constraint slot, or
/// `None` when the identified active set is inconsistent (rank-deficient
/// system, negative multipliers, or infeasibility), in which case the
/// barrier result stands.
fn polish(
    problem: &Problem<'_>,
    w_in: &[f64; MAX_VARS],
    mu: f64,
) -> Option<([f64; MAX_VARS], Vec<f64>)> {
    let n = problem.nvars;
    let points = problem.points(w_in);
    // On the central path, active constraints sit at slack ~ mu / lambda*
    // while inactive ones keep O(1) slack; the geometric mean sqrt(mu)
    // separates the two once mu is moderately small.
    let slack_cut = mu.sqrt().max(mu / POLISH_ACTIVE_LAMBDA * 1e-9);
    let mut active: Vec<usize> = Vec::new();
    for (slot, c) in problem.constraints.iter().enumerate() {
        let v = c.value(&points, w_in);
        if v < 0.0 && -v <= slack_cut {
            active.push(slot);
        }
    }
    if active.is_empty() {
        return None;
    }
    let m = active.len();
    let mut w = *w_in;
    let mut lambda = vec![0.0f64; m];
    for (ai, &slot) in active.iter().enumerate() {
        let v = problem.constraints[slot].value(&points, &w);
        lambda[ai] = mu / (-v).max(1e-300);
    }

    let mut best_residual = f64::INFINITY;
    for _ in 0..10 {
        let points = problem.points(&w);
        // Residual: stationarity over w, then raw constraint values.
        let mut grad = [0.0f64; MAX_VARS];
        problem.objective_grad(&points, &mut grad);
        let mut cons_grads: Vec<[f64; MAX_VARS]> = Vec::with_capacity(m);
        for (ai, &slot) in active.iter().enumerate() {
            let mut cg = [0.0f64; MAX_VARS];
            problem.constraints[slot].grad_into(&problem.blocks, &points, &mut cg);
            for i in 0..n {
                grad[i] += lambda[ai] * cg[i];
            }
            cons_grads.push(cg);
        }
        let mut residual = vec![0.0f64; n + m];
        residual[..n].copy_from_slice(&grad[..n]);
        for (ai, &slot) in active.iter().enumerate() {
            let c = &problem.constraints[slot];
            // Polish drives the unshifted constraint to zero.
            residual[n + ai] = c.value(&points, &w) + c.shift;
        }
        let rnorm = residual.iter().map(|r| r * r).sum::<f64>().sqrt();
        if rnorm <= 1e-12 {
            break;
        }
        if rnorm >= best_residual * 0.999 && best_residual < 1e-8 {
            break;
        }
        best_residual = best_residual.min(rnorm);

        let mut hess = [[0.0f64; MAX_VARS]; MAX_VARS];
        problem.objective_hess(&mut hess);
        for (ai, &slot) in active.iter().enumerate() {
            let (off, ch) = problem.constraints[slot].hessian(&problem.blocks, &points);
            let k = problem.blocks[problem.constraints[slot].block_id].width();
            for i in 0..k {
                for j in 0..k {
                    hess[off + i][off + j] += lambda[ai] * ch[i][j];
                }
            }
        }
        let dim = n + m;
        let mut kkt = vec![vec![0.0f64; dim]; dim];
        for i in 0..n {
            for j in 0..n {
                kkt[i][j] = hess[i][j];
            }
        }
        for (ai, cg) in cons_grads.iter().enumerate() {
            for i in 0..n {
                kkt[i][n + ai] = cg[i];
                kkt[n + ai][i] = cg[i];
            }
        }
        let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
        let delta = lu_solve(kkt, rhs)?;
        for i in 0..n {
            w[i] += delta[i];
        }
        for ai in 0..m {
            lambda[ai] += delta[n + ai];
        }
    }

    // Validate the polished point: KKT residual, multiplier signs, and
    // feasibility of the inactive constraints.
    let points = problem.points(&w);
    let mut grad = [0.0f64; MAX_VARS];
    problem.objective_grad(&points, &mut grad);
    for (ai, &slot) in active.iter().enumerate() {
        let mut cg = [0.0f64; MAX_VARS];
        problem.constraints[slot].grad_into(&problem.blocks, &points, &mut cg);
        for i in 0..n {
            grad[i] += lambda[ai] * cg[i];
        }
    }
    let stat_norm = grad.iter().take(n).map(|g| g * g).sum::<f64>().sqrt();
    if stat_norm > 1e-8 {
        return None;
    }
    let mut slot_lambda = vec![0.0f64; problem.constraints.len()];
    for (ai, &slot) in active.iter().enumerate() {
        if lambda[ai] < -1e-9 {
            return None;
        }
        let c = &problem.constraints[slot];
        let raw = c.value(&points, &w) + c.shift;
        if raw.abs() > 1e-8 {
            return None;
        }
        slot_lambda[slot] = lambda[ai].max(0.0);
    }
    for (slot, c) in problem.constraints.iter().enumerate() {
        if !active.contains(&slot) && c.value(&points, &w) + c.shift > 1e-9 {
            return None;
        }
    }
    Some((w, slot_lambda))
}

/// Run the barrier schedule then polish; returns the final iterate, one
/// multiplier per constraint slot, total Newton iterations, and whether the
/// result meets the stationarity contract.
///
/// Once the barrier weight is small enough for the active set to be
/// trustworthy, a successful polish ends the solve early; the later stages
/// only run when the polish keeps rejecting its active-set guess.
fn minimize(problem: &Problem<'_>, w0: [f64; MAX_VARS]) -> ([f64; MAX_VARS], Vec<f64>, usize, bool) {
    let mut w = w0;
    let mut iterations = 0;
    let mut last = StageOutcome {
        converged: true,
        grad_norm: 0.0,
        iterations: 0,
    };
    for mu in barrier_schedule() {
        last = newton_stage(problem, &mut w, mu, stage_tol(mu), None);
        iterations += last.iterations;
        if mu <= 1.1 {
            if let Some((wp, slot_lambda)) = polish(problem, &w, mu) {
                return (wp, slot_lambda, iterations, true);
            }
        }
    }
    let points = problem.points(&w);
    let slot_lambda: Vec<f64> = problem
        .constraints
        .iter()
        .map(|c| {
            let v = c.value(&points, &w);
            if v < 0.0 {
                MU_FINAL / (-v)
            } else {
                0.0
            }
        })
        .collect();
    let ok = last.converged || last.grad_norm <= 1e-6;
    (w, slot_lambda, iterations, ok)
}

// ---------------------------------------------------------------------------
// Public programs
// ---------------------------------------------------------------------------

/// Minimum squared distance between two convex regions. Increments the
/// check counter once per invocation.
pub fn solve_min_distance(
    region_a: &ConvexRegion,
    region_b: &ConvexRegion,
    counter: &mut CheckCounter,
) -> Result<SolveResult> {
    solve_min_distance_with(region_a, region_b, SolveOptions::default(), counter)
}

pub fn solve_min_distance_with(
    region_a: &ConvexRegion,
    region_b: &ConvexRegion,
    options: SolveOptions,
    counter: &mut CheckCounter,
) -> Result<SolveResult> {
    counter.increment();
    if region_a.dim() != region_b.dim() {
        return Err(Error::DimensionMismatch {
            expected: region_a.dim(),
            got: region_b.dim(),
        });
    }
    let red_a = presolve(region_a);
    let red_b = presolve(region_b);
    let total_atoms = region_a.atoms().len() + region_b.atoms().len();
    if red_a.empty || red_b.empty {
        return Ok(infeasible_result(red_a.q0, Some(red_b.q0), total_atoms));
    }
    solve_two_blocks(region_a, &red_a, region_b, &red_b, options)
}

/// Squared distance from `point` to its Euclidean projection onto `region`.
/// Does not increment the check counter: only minimum-distance programs
/// count toward the efficiency metric.
pub fn solve_projection(
    point: &Vector,
    region: &ConvexRegion,
    _counter: &mut CheckCounter,
) -> Result<SolveResult> {
    solve_projection_with(point, region, SolveOptions::default())
}

pub fn solve_projection_with(
    point: &Vector,
    region: &ConvexRegion,
    options: SolveOptions,
) -> Result<SolveResult> {
    point.check_dim(region.dim())?;
    // Projection of a feasible point is the point itself, exactly.
    if region.contains(point, 0.0)? {
        let mut result = assemble_result(0.0, *point, None, SolveStatus::Optimal, 0);
        result.multipliers = vec![0.0; region.atoms().len()];
        result.constraint_values = region
            .atoms()
            .iter()
            .map(|a| a.value_unchecked(point))
            .collect();
        result.active_set = active_set(&result, EPS_ACTIVE);
        return Ok(result);
    }
    let red = presolve(region);
    if red.empty {
        return Ok(infeasible_result(red.q0, None, region.atoms().len()));
    }

    if red.basis.is_empty() {
        let mut result = assemble_result(
            (red.q0 - *point).norm_squared(),
            red.q0,
            None,
            SolveStatus::Optimal,
            0,
        );
        result.multipliers = vec![0.0; region.atoms().len()];
        finalize_projection(&mut result, point, region, &red);
        return Ok(result);
    }

    let block = Block {
        q0: red.q0,
        basis: red.basis.clone(),
        offset: 0,
    };
    let k = block.width();
    let atoms: Vec<&ConstraintAtom> = red.kept.iter().map(|&i| &region.atoms()[i]).collect();

    let mut w_start = [0.0f64; MAX_VARS];
    let start_point = options.start_a.unwrap_or(*point);
    for (i, b) in block.basis.iter().enumerate() {
        w_start[i] = b.dot(&(start_point - red.q0));
    }

    let (p1, mut iterations) = phase1(&block, &atoms, w_start);
    let (w0, shift) = match p1 {
        Phase1::Interior(w) => (w, 0.0),
        Phase1::Thin(w, margin) => (w, margin.max(0.0) + INFEASIBLE_MARGIN),
        Phase1::Empty => {
            return Ok(infeasible_result(red.q0, None, region.atoms().len()));
        }
    };

    let constraints: Vec<Constraint<'_>> = atoms
        .iter()
        .map(|atom| Constraint {
            atom,
            block_id: 0,
            shift,
            epigraph_var: None,
        })
        .collect();
    let problem = Problem {
        nvars: k,
        blocks: vec![block],
        constraints,
        objective: Objective::Projection { anchor: *point },
    };

    let (w, slot_lambda, newton_iters, ok) = minimize(&problem, w0);
    iterations += newton_iters;
    let q = problem.blocks[0].point(&w);
    let status = if ok {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIterations
    };
    let mut result = assemble_result((q - *point).norm_squared(), q, None, status, iterations);
    result.multipliers = vec![0.0; region.atoms().len()];
    for (slot, &atom_idx) in red.kept.iter().enumerate() {
        result.multipliers[atom_idx] = slot_lambda[slot];
    }
    finalize_projection(&mut result, point, region, &red);
    Ok(result)
}

fn solve_two_blocks(
    region_a: &ConvexRegion,
    red_a: &Reduced,
    region_b: &ConvexRegion,
    red_b: &Reduced,
    options: SolveOptions,
) -> Result<SolveResult> {
    let na = region_a.atoms().len();
    let nb = region_b.atoms().len();

    // A point block degenerates the program into a projection onto the
    // other block (or a constant when both are points).
    if red_a.basis.is_empty() && red_b.basis.is_empty() {
        let mut result = assemble_result(
            (red_a.q0 - red_b.q0).norm_squared(),
            red_a.q0,
            Some(red_b.q0),
            SolveStatus::Optimal,
            0,
        );
        result.multipliers = vec![0.0; na + nb];
        finalize_min_distance(&mut result, region_a, red_a, region_b, red_b);
        return Ok(result);
    }
    if red_b.basis.is_empty() {
        let sub = solve_projection_with(
            &red_b.q0,
            region_a,
            SolveOptions {
                start_a: options.start_a,
                start_b: None,
            },
        )?;
        if sub.status == SolveStatus::Infeasible {
            return Ok(infeasible_result(red_a.q0, Some(red_b.q0), na + nb));
        }
        let mut result = assemble_result(
            sub.value,
            sub.primal_q,
            Some(red_b.q0),
            sub.status,
            sub.iterations,
        );
        result.multipliers = vec![0.0; na + nb];
        result.multipliers[..na].copy_from_slice(&sub.multipliers);
        finalize_min_distance(&mut result, region_a, red_a, region_b, red_b);
        return Ok(result);
    }
    if red_a.basis.is_empty() {
        let sub = solve_projection_with(
            &red_a.q0,
            region_b,
            SolveOptions {
                start_a: options.start_b,
                start_b: None,
            },
        )?;
        if sub.status == SolveStatus::Infeasible {
            return Ok(infeasible_result(red_a.q0, Some(red_b.q0), na + nb));
        }
        let mut result = assemble_result(
            sub.value,
            red_a.q0,
            Some(sub.primal_q),
            sub.status,
            sub.iterations,
        );
        result.multipliers = vec![0.0; na + nb];
        result.multipliers[na..].copy_from_slice(&sub.multipliers);
        finalize_min_distance(&mut result, region_a, red_a, region_b, red_b);
        return Ok(result);
    }

    let ka = red_a.basis.len();
    let kb = red_b.basis.len();
    let block_a = Block {
        q0: red_a.q0,
        basis: red_a.basis.clone(),
        offset: 0,
    };
    let block_b = Block {
        q0: red_b.q0,
        basis: red_b.basis.clone(),
        offset: ka,
    };
    let atoms_a: Vec<&ConstraintAtom> = red_a.kept.iter().map(|&i| &region_a.atoms()[i]).collect();
    let atoms_b: Vec<&ConstraintAtom> = red_b.kept.iter().map(|&i| &region_b.atoms()[i]).collect();

    let mut w_start_a = [0.0f64; MAX_VARS];
    if let Some(start) = options.start_a {
        for (i, b) in block_a.basis.iter().enumerate() {
            w_start_a[i] = b.dot(&(start - red_a.q0));
        }
    }
    let mut w_start_b = [0.0f64; MAX_VARS];
    if let Some(start) = options.start_b {
        for (i, b) in block_b.basis.iter().enumerate() {
            w_start_b[i] = b.dot(&(start - red_b.q0));
        }
    }

    let mut iterations = 0;
    let (p1a, it_a) = phase1(&block_a, &atoms_a, w_start_a);
    iterations += it_a;
    let (wa, shift_a) = match p1a {
        Phase1::Interior(w) => (w, 0.0),
        Phase1::Thin(w, margin) => (w, margin.max(0.0) + INFEASIBLE_MARGIN),
        Phase1::Empty => return Ok(infeasible_result(red_a.q0, Some(red_b.q0), na + nb)),
    };
    let (p1b, it_b) = phase1(&block_b, &atoms_b, w_start_b);
    iterations += it_b;
    let (wb, shift_b) = match p1b {
        Phase1::Interior(w) => (w, 0.0),
        Phase1::Thin(w, margin) => (w, margin.max(0.0) + INFEASIBLE_MARGIN),
        Phase1::Empty => return Ok(infeasible_result(red_a.q0, Some(red_b.q0), na + nb)),
    };

    let mut constraints: Vec<Constraint<'_>> = Vec::with_capacity(atoms_a.len() + atoms_b.len());
    for atom in &atoms_a {
        constraints.push(Constraint {
            atom,
            block_id: 0,
            shift: shift_a,
            epigraph_var: None,
        });
    }
    for atom in &atoms_b {
        constraints.push(Constraint {
            atom,
            block_id: 1,
            shift: shift_b,
            epigraph_var: None,
        });
    }
    let problem = Problem {
        nvars: ka + kb,
        blocks: vec![block_a, block_b],
        constraints,
        objective: Objective::MinDistance,
    };

    let mut w0 = [0.0f64; MAX_VARS];
    w0[..ka].copy_from_slice(&wa[..ka]);
    w0[ka..ka + kb].copy_from_slice(&wb[..kb]);

    let (w, slot_lambda, newton_iters, ok) = minimize(&problem, w0);
    iterations += newton_iters;

    let q = problem.blocks[0].point(&w);
    let qt = problem.blocks[1].point(&w);
    let status = if ok {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIterations
    };
    let mut result = assemble_result((q - qt).norm_squared(), q, Some(qt), status, iterations);
    result.multipliers = vec![0.0; na + nb];
    for (slot, &atom_idx) in red_a.kept.iter().enumerate() {
        result.multipliers[atom_idx] = slot_lambda[slot];
    }
    for (slot, &atom_idx) in red_b.kept.iter().enumerate() {
        result.multipliers[na + atom_idx] = slot_lambda[atoms_a.len() + slot];
    }
    finalize_min_distance(&mut result, region_a, red_a, region_b, red_b);
    Ok(result)
}

fn assemble_result(
    value: f64,
    primal_q: Vector,
    primal_qtilde: Option<Vector>,
    status: SolveStatus,
    iterations: usize,
) -> SolveResult {
    SolveResult {
        value,
        primal_q,
        primal_qtilde,
        multipliers: Vec::new(),
        constraint_values: Vec::new(),
        active_set: Vec::new(),
        status,
        iterations,
    }
}

fn infeasible_result(q: Vector, qt: Option<Vector>, total_atoms: usize) -> SolveResult {
    SolveResult {
        value: f64::INFINITY,
        primal_q: q,
        primal_qtilde: qt,
        multipliers: vec![0.0; total_atoms],
        constraint_values: vec![f64::INFINITY; total_atoms],
        active_set: Vec::new(),
        status: SolveStatus::Infeasible,
        iterations: 0,
    }
}

/// Fill multipliers for constraints eliminated during presolve. The
/// stationarity residual left by the kept constraints is resolved against
/// the equality-pair normals in a least-squares sense and split into the
/// two one-sided multipliers by sign.
fn fill_pair_multipliers(
    residual: &Vector,
    pairs: &[EqPair],
    multipliers: &mut [f64],
    index_offset: usize,
) {
    if pairs.is_empty() {
        return;
    }
    let m = pairs.len();
    let mut h = [[0.0f64; MAX_VARS]; MAX_VARS];
    let mut rhs = [0.0f64; MAX_VARS];
    for i in 0..m {
        for j in 0..m {
            h[i][j] = pairs[i].unit.dot(&pairs[j].unit);
        }
        h[i][i] += 1e-12;
        rhs[i] = -pairs[i].unit.dot(residual);
    }
    if let Some(c) = cholesky_solve(m, &h, &rhs) {
        for (i, pair) in pairs.iter().enumerate() {
            if c[i] >= 0.0 {
                multipliers[index_offset + pair.upper] = c[i] / pair.upper_scale;
            } else {
                multipliers[index_offset + pair.lower] = -c[i] / pair.lower_scale;
            }
        }
    }
}

fn finalize_projection(
    result: &mut SolveResult,
    point: &Vector,
    region: &ConvexRegion,
    red: &Reduced,
) {
    let mut residual = (result.primal_q - *point) * 2.0;
    for (i, atom) in region.atoms().iter().enumerate() {
        residual += atom.gradient_unchecked(&result.primal_q) * result.multipliers[i];
    }
    fill_pair_multipliers(&residual, &red.pairs, &mut result.multipliers, 0);
    result.constraint_values = region
        .atoms()
        .iter()
        .map(|a| a.value_unchecked(&result.primal_q))
        .collect();
    result.active_set = active_set(result, EPS_ACTIVE);
}

fn finalize_min_distance(
    result: &mut SolveResult,
    region_a: &ConvexRegion,
    red_a: &Reduced,
    region_b: &ConvexRegion,
    red_b: &Reduced,
) {
    let na = region_a.atoms().len();
    let q = result.primal_q;
    let qt = result.primal_qtilde.expect("two-block result");

    let mut residual_a = (q - qt) * 2.0;
    for (i, atom) in region_a.atoms().iter().enumerate() {
        residual_a += atom.gradient_unchecked(&q) * result.multipliers[i];
    }
    fill_pair_multipliers(&residual_a, &red_a.pairs, &mut result.multipliers, 0);

    let mut residual_b = (qt - q) * 2.0;
    for (i, atom) in region_b.atoms().iter().enumerate() {
        residual_b += atom.gradient_unchecked(&qt) * result.multipliers[na + i];
    }
    fill_pair_multipliers(&residual_b, &red_b.pairs, &mut result.multipliers, na);

    let mut values = Vec::with_capacity(na + region_b.atoms().len());
    for atom in region_a.atoms() {
        values.push(atom.value_unchecked(&q));
    }
    for atom in region_b.atoms() {
        values.push(atom.value_unchecked(&qt));
    }
    result.constraint_values = values;
    result.active_set = active_set(result, EPS_ACTIVE);
}

/// Norm of the Lagrangian stationarity residual at the result's
/// primal/multiplier pair, measured inside the feasible manifold of each
/// region (equality-pinned directions are projected out, matching how the
/// programs were solved).
pub fn kkt_residual(result: &SolveResult, problem: &KktProblem<'_>) -> Result<f64> {
    match problem {
        KktProblem::Projection { point, region } => {
            if result.multipliers.len() != region.atoms().len() {
                return Err(Error::invalid(
                    "multiplier count does not match the region's atoms",
                ));
            }
            let red = presolve(region);
            let mut residual = (result.primal_q - *point) * 2.0;
            for (i, atom) in region.atoms().iter().enumerate() {
                residual += atom.gradient_unchecked(&result.primal_q) * result.multipliers[i];
            }
            Ok(reduced_norm(&residual, &red.basis))
        }
        KktProblem::MinDistance { region_a, region_b } => {
            let na = region_a.atoms().len();
            let nb = region_b.atoms().len();
            if result.multipliers.len() != na + nb {
                return Err(Error::invalid(
                    "multiplier count does not match the regions' atoms",
                ));
            }
            let qt = result
                .primal_qtilde
                .ok_or_else(|| Error::invalid("minimum-distance result lacks primal_qtilde"))?;
            let red_a = presolve(region_a);
            let red_b = presolve(region_b);
            let mut ra = (result.primal_q - qt) * 2.0;
            for (i, atom) in region_a.atoms().iter().enumerate() {
                ra += atom.gradient_unchecked(&result.primal_q) * result.multipliers[i];
            }
            let mut rb = (qt - result.primal_q) * 2.0;
            for (i, atom) in region_b.atoms().iter().enumerate() {
                rb += atom.gradient_unchecked(&qt) * result.multipliers[na + i];
            }
            let sa = reduced_norm(&ra, &red_a.basis);
            let sb = reduced_norm(&rb, &red_b.basis);
            Ok((sa * sa + sb * sb).sqrt())
        }
    }
}

fn reduced_norm(residual: &Vector, basis: &[Vector]) -> f64 {
    basis
        .iter()
        .map(|b| b.dot(residual).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_srs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn box2(half: f64) -> ConvexRegion {
        ConvexRegion::bounding_box(&Vector::new2(-half, -half), &Vector::new2(half, half)).unwrap()
    }

    /// Half-plane y <= 0 inside the box, expressed through the capture
    /// frontier of a defender at (0, 2) against an attacker at (0, -2).
    fn bisector_srs() -> ConvexRegion {
        build_srs(
            &[Vector::new2(0.0, 2.0)],
            &Vector::new2(0.0, -2.0),
            &[1.0],
            &[0.0],
            &box2(5.0),
        )
        .unwrap()
    }

    #[test]
    fn bisector_distance_to_disk_target() {
        let srs = bisector_srs();
        let target = ConvexRegion::ball(Vector::new2(0.0, 3.0), 1.0);
        let mut counter = CheckCounter::new();
        let result = solve_min_distance(&srs, &target, &mut counter).unwrap();
        assert_eq!(result.status, SolveStatus::Optimal);
        assert!((result.value - 4.0).abs() < 1e-6, "value {}", result.value);
        assert!(result.primal_q.distance(&Vector::new2(0.0, 0.0)) < 1e-5);
        assert!(
            result
                .primal_qtilde
                .unwrap()
                .distance(&Vector::new2(0.0, 2.0))
                < 1e-5
        );
        assert_eq!(counter.count(), 1);

        // The frontier atom (last of the SRS atoms) is active, the box is not.
        let frontier_idx = srs.atoms().len() - 1;
        assert!(result.active_set.contains(&frontier_idx));
        for k in 0..4 {
            assert!(!result.active_set.contains(&k));
        }
        // Analytic multipliers: frontier value is 8y, so lambda = 0.5; the
        // target ball takes lambda = 2.
        assert!((result.multipliers[frontier_idx] - 0.5).abs() < 1e-6);
        assert!((result.multipliers[srs.atoms().len()] - 2.0).abs() < 1e-6);

        let residual = kkt_residual(
            &result,
            &KktProblem::MinDistance {
                region_a: &srs,
                region_b: &target,
            },
        )
        .unwrap();
        assert!(residual <= 1e-6, "residual {residual}");
    }

    #[test]
    fn hand_built_kkt_point_has_tiny_residual() {
        let srs = bisector_srs();
        let target = ConvexRegion::ball(Vector::new2(0.0, 3.0), 1.0);
        let mut multipliers = vec![0.0; srs.atoms().len() + target.atoms().len()];
        multipliers[srs.atoms().len() - 1] = 0.5;
        multipliers[srs.atoms().len()] = 2.0;
        let result = SolveResult {
            value: 4.0,
            primal_q: Vector::new2(0.0, 0.0),
            primal_qtilde: Some(Vector::new2(0.0, 2.0)),
            multipliers,
            constraint_values: Vec::new(),
            active_set: Vec::new(),
            status: SolveStatus::Optimal,
            iterations: 0,
        };
        let problem = KktProblem::MinDistance {
            region_a: &srs,
            region_b: &target,
        };
        let residual = kkt_residual(&result, &problem).unwrap();
        assert!(residual <= 1e-9, "residual {residual}");

        // Perturbing the multipliers breaks stationarity measurably.
        let mut perturbed = result.clone();
        for m in &mut perturbed.multipliers {
            *m += 0.1;
        }
        let residual = kkt_residual(&perturbed, &problem).unwrap();
        assert!(residual > 1e-3, "residual {residual}");
    }

    #[test]
    fn overlapping_regions_have_zero_distance() {
        let a = ConvexRegion::ball(Vector::new2(0.0, 0.0), 2.0);
        let b = ConvexRegion::ball(Vector::new2(1.0, 0.0), 2.0);
        let mut counter = CheckCounter::new();
        let result = solve_min_distance(&a, &b, &mut counter).unwrap();
        assert!(result.value < 1e-7, "value {}", result.value);
    }

    #[test]
    fn apollonius_disk_to_point_target() {
        let srs = build_srs(
            &[Vector::new2(3.0, 0.0)],
            &Vector::new2(0.0, 0.0),
            &[2.0],
            &[0.0],
            &box2(5.0),
        )
        .unwrap();
        let target = ConvexRegion::ball(Vector::new2(4.0, 0.0), 0.0);
        let mut counter = CheckCounter::new();
        let result = solve_min_distance(&srs, &target, &mut counter).unwrap();
        assert_eq!(result.status, SolveStatus::Optimal);
        assert!((result.value - 9.0).abs() < 1e-6, "value {}", result.value);
        assert!(result.primal_q.distance(&Vector::new2(1.0, 0.0)) < 1e-5);
        assert_eq!(result.primal_qtilde.unwrap(), Vector::new2(4.0, 0.0));
    }

    #[test]
    fn segment_target_through_touching_halfspaces() {
        // Target is the segment y = 5 inside the box; region A is a disk.
        let target = box2(5.0)
            .intersect(
                &ConvexRegion::from_atoms(
                    2,
                    vec![ConstraintAtom::affine(Vector::new2(0.0, -1.0), 5.0)],
                )
                .unwrap(),
            )
            .unwrap();
        let a = ConvexRegion::ball(Vector::new2(0.0, 0.0), 1.0);
        let mut counter = CheckCounter::new();
        let result = solve_min_distance(&a, &target, &mut counter).unwrap();
        assert_eq!(result.status, SolveStatus::Optimal);
        assert!((result.value - 16.0).abs() < 1e-6, "value {}", result.value);
        assert!(result.primal_q.distance(&Vector::new2(0.0, 1.0)) < 1e-5);
        assert!(
            result
                .primal_qtilde
                .unwrap()
                .distance(&Vector::new2(0.0, 5.0))
                < 1e-5
        );
        let residual = kkt_residual(
            &result,
            &KktProblem::MinDistance {
                region_a: &a,
                region_b: &target,
            },
        )
        .unwrap();
        assert!(residual <= 1e-6, "residual {residual}");
    }

    #[test]
    fn projection_cases() {
        let mut counter = CheckCounter::new();
        let domain = box2(5.0);

        let inside = Vector::new2(0.3, -0.7);
        let r = solve_projection(&inside, &domain, &mut counter).unwrap();
        assert!(r.value < 1e-9);
        assert!(r.primal_q.distance(&inside) < 1e-5);
        assert!(r.active_set.is_empty());

        let r = solve_projection(&Vector::new2(0.0, 6.0), &domain, &mut counter).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
        assert!(r.primal_q.distance(&Vector::new2(0.0, 5.0)) < 1e-5);

        let halfplane_ball = ConvexRegion::from_atoms(
            2,
            vec![
                ConstraintAtom::affine(Vector::new2(0.0, -1.0), 0.0),
                ConstraintAtom::ball(Vector::new2(0.0, 1.0), 3.0),
            ],
        )
        .unwrap();
        let r = solve_projection(&Vector::new2(0.0, -2.0), &halfplane_ball, &mut counter).unwrap();
        assert!((r.value - 4.0).abs() < 1e-6);
        assert!(r.primal_q.distance(&Vector::new2(0.0, 0.0)) < 1e-5);

        // Projections never advance the check counter.
        assert_eq!(counter.count(), 0);
    }

    #[test]
    fn box_corner_projection_activates_both_faces() {
        let domain = box2(5.0);
        let mut counter = CheckCounter::new();
        let r = solve_projection(&Vector::new2(7.0, 7.0), &domain, &mut counter).unwrap();
        assert!(r.primal_q.distance(&Vector::new2(5.0, 5.0)) < 1e-5);
        // Atoms 0 and 2 are the +x and +y faces.
        assert!(r.active_set.contains(&0));
        assert!(r.active_set.contains(&2));
        assert_eq!(active_set(&r, 1e-6), r.active_set);
    }

    #[test]
    fn infeasible_detection() {
        // Gap between opposing halfspaces.
        let empty = ConvexRegion::from_atoms(
            2,
            vec![
                ConstraintAtom::affine(Vector::new2(0.0, 1.0), -5.0),
                ConstraintAtom::affine(Vector::new2(0.0, -1.0), 6.0),
            ],
        )
        .unwrap();
        let mut counter = CheckCounter::new();
        let r = solve_projection(&Vector::new2(0.0, 0.0), &empty, &mut counter).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);

        // Disjoint balls, found by phase-1 rather than presolve.
        let separated = ConvexRegion::from_atoms(
            2,
            vec![
                ConstraintAtom::ball(Vector::new2(0.0, 0.0), 1.0),
                ConstraintAtom::ball(Vector::new2(10.0, 0.0), 1.0),
            ],
        )
        .unwrap();
        let r = solve_projection(&Vector::new2(5.0, 0.0), &separated, &mut counter).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn deterministic_bit_identical_results() {
        let srs = bisector_srs();
        let target = ConvexRegion::ball(Vector::new2(0.0, 3.0), 1.0);
        let mut c1 = CheckCounter::new();
        let mut c2 = CheckCounter::new();
        let r1 = solve_min_distance(&srs, &target, &mut c1).unwrap();
        let r2 = solve_min_distance(&srs, &target, &mut c2).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn warm_starts_agree_when_value_is_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let domain = box2(5.0);
        let mut tested = 0;
        while tested < 8 {
            let d = Vector::new2(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let a = Vector::new2(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let srs = build_srs(&[d], &a, &[1.2], &[0.4], &domain).unwrap();
            let target = ConvexRegion::ball(
                Vector::new2(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
                0.8,
            );
            let mut counter = CheckCounter::new();
            let base = solve_min_distance(&srs, &target, &mut counter).unwrap();
            if base.status != SolveStatus::Optimal || base.value <= 1e-6 {
                continue;
            }
            tested += 1;
            for _ in 0..5 {
                let opts = SolveOptions {
                    start_a: Some(Vector::new2(
                        rng.gen_range(-5.0..5.0),
                        rng.gen_range(-5.0..5.0),
                    )),
                    start_b: Some(Vector::new2(
                        rng.gen_range(-5.0..5.0),
                        rng.gen_range(-5.0..5.0),
                    )),
                };
                let warm = solve_min_distance_with(&srs, &target, opts, &mut counter).unwrap();
                assert!(
                    warm.primal_q.distance(&base.primal_q) < 1e-6,
                    "warm {:?} vs base {:?}",
                    warm.primal_q,
                    base.primal_q
                );
                assert!((warm.value - base.value).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn counter_counts_only_min_distance_calls() {
        let a = ConvexRegion::ball(Vector::new2(0.0, 0.0), 1.0);
        let b = ConvexRegion::ball(Vector::new2(4.0, 0.0), 1.0);
        let mut counter = CheckCounter::new();
        for _ in 0..3 {
            solve_min_distance(&a, &b, &mut counter).unwrap();
        }
        for _ in 0..2 {
            solve_projection(&Vector::new2(9.0, 9.0), &a, &mut counter).unwrap();
        }
        assert_eq!(counter.count(), 3);
    }

    /// Finite-difference gradient of the optimal value against the
    /// multiplier formula for defender parameter moves.
    #[test]
    fn value_gradient_matches_multiplier_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let domain = box2(5.0);
        let mut tested = 0;
        while tested < 10 {
            let d = Vector::new2(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let a = Vector::new2(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let gamma = rng.gen_range(1.0..1.6);
            let radius = rng.gen_range(0.2..0.8);
            let target = ConvexRegion::ball(
                Vector::new2(rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)),
                0.7,
            );
            let srs = build_srs(&[d], &a, &[gamma], &[radius], &domain).unwrap();
            let mut counter = CheckCounter::new();
            let base = solve_min_distance(&srs, &target, &mut counter).unwrap();
            if base.status != SolveStatus::Optimal || base.value < 1e-2 {
                continue;
            }
            let frontier_idx = srs.atoms().len() - 1;
            let lambda = base.multipliers[frontier_idx];
            if lambda < 1e-4 || base.primal_q.distance(&a) < 1e-3 {
                continue;
            }
            tested += 1;
            let (grad_d, _) = crate::geometry::capture_frontier_param_gradients(
                &srs.atoms()[frontier_idx],
                &base.primal_q,
            )
            .unwrap();
            let step = 1e-5;
            for k in 0..2 {
                let mut dp = d;
                let mut dm = d;
                dp[k] += step;
                dm[k] -= step;
                let sp = build_srs(&[dp], &a, &[gamma], &[radius], &domain).unwrap();
                let sm = build_srs(&[dm], &a, &[gamma], &[radius], &domain).unwrap();
                let vp = solve_min_distance(&sp, &target, &mut counter).unwrap().value;
                let vm = solve_min_distance(&sm, &target, &mut counter).unwrap().value;
                let fd = (vp - vm) / (2.0 * step);
                let formula = lambda * grad_d[k];
                let scale = formula.abs().max(1e-2);
                assert!(
                    (fd - formula).abs() / scale < 1e-3,
                    "fd {fd} vs formula {formula}"
                );
            }
        }
    }
}
