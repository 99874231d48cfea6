//! Convex constraint atoms, regions, and safe-reachable sets.
//!
//! A region is the intersection of the zero sublevel sets of smooth convex
//! scalar atoms. Four atom kinds cover every scenario shipped with the
//! crate: affine halfspaces, balls, axis-aligned cylinders, and the capture
//! frontier that bounds one defender's contribution to an attacker's
//! safe-reachable set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec::{Vector, MAX_DIM};

/// Symmetric n-by-n Hessian of one atom, stored dense.
#[derive(Clone, Copy, Debug)]
pub struct Hessian {
    pub data: [[f64; MAX_DIM]; MAX_DIM],
    pub dim: usize,
}

impl Hessian {
    pub fn zeros(dim: usize) -> Self {
        Hessian {
            data: [[0.0; MAX_DIM]; MAX_DIM],
            dim,
        }
    }

    pub fn identity_scaled(dim: usize, s: f64) -> Self {
        let mut h = Hessian::zeros(dim);
        for k in 0..dim {
            h.data[k][k] = s;
        }
        h
    }
}

/// One smooth convex scalar constraint `value(q) <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConstraintAtom {
    /// `normal . q + offset <= 0`.
    Affine { normal: Vector, offset: f64 },
    /// `||q - center||^2 - radius^2 <= 0`.
    Ball { center: Vector, radius: f64 },
    /// `sum_{k != axis} (q_k - center_k)^2 - radius^2 <= 0`; the constraint
    /// ignores the `axis` coordinate. `center` holds the cross-section
    /// center with one entry per non-axis coordinate, in coordinate order.
    AxisCylinder {
        axis: usize,
        center: Vector,
        radius: f64,
    },
    /// Capture frontier of one defender against one attacker:
    /// `(gamma * ||q - attacker|| + capture_radius)^2 - ||q - defender||^2 <= 0`.
    ///
    /// Its zero sublevel set collects the points the attacker can reach
    /// before the defender can intercept within its capture radius. Convex
    /// for `gamma >= 1` and `capture_radius >= 0`.
    CaptureFrontier {
        defender: Vector,
        attacker: Vector,
        gamma: f64,
        capture_radius: f64,
    },
}

/// Below this distance from the attacker position the capture frontier's
/// norm term is treated as having zero direction and its Hessian is ridge
/// regularized.
const FRONTIER_NORM_GUARD: f64 = 1e-12;

impl ConstraintAtom {
    pub fn affine(normal: Vector, offset: f64) -> Self {
        ConstraintAtom::Affine { normal, offset }
    }

    pub fn ball(center: Vector, radius: f64) -> Self {
        ConstraintAtom::Ball { center, radius }
    }

    pub fn capture_frontier(
        defender: Vector,
        attacker: Vector,
        gamma: f64,
        capture_radius: f64,
    ) -> Result<Self> {
        if gamma < 1.0 {
            return Err(Error::invalid(format!(
                "speed ratio gamma must be >= 1 for a convex frontier, got {gamma}"
            )));
        }
        if capture_radius < 0.0 {
            return Err(Error::invalid("capture radius must be nonnegative"));
        }
        defender.check_dim(attacker.dim())?;
        Ok(ConstraintAtom::CaptureFrontier {
            defender,
            attacker,
            gamma,
            capture_radius,
        })
    }

    /// Spatial dimension the atom constrains.
    pub fn dim(&self) -> usize {
        match self {
            ConstraintAtom::Affine { normal, .. } => normal.dim(),
            ConstraintAtom::Ball { center, .. } => center.dim(),
            ConstraintAtom::AxisCylinder { center, .. } => center.dim() + 1,
            ConstraintAtom::CaptureFrontier { defender, .. } => defender.dim(),
        }
    }

    fn check_query(&self, q: &Vector) -> Result<()> {
        q.check_dim(self.dim())
    }

    /// Constraint value at `q`; the region side is `value <= 0`.
    pub fn value(&self, q: &Vector) -> Result<f64> {
        self.check_query(q)?;
        Ok(self.value_unchecked(q))
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, q: &Vector) -> f64 {
        match self {
            ConstraintAtom::Affine { normal, offset } => normal.dot(q) + offset,
            ConstraintAtom::Ball { center, radius } => {
                (*q - *center).norm_squared() - radius * radius
            }
            ConstraintAtom::AxisCylinder {
                axis,
                center,
                radius,
            } => {
                let mut acc = -radius * radius;
                let mut c = 0;
                for k in 0..q.dim() {
                    if k != *axis {
                        let d = q[k] - center[c];
                        acc += d * d;
                        c += 1;
                    }
                }
                acc
            }
            ConstraintAtom::CaptureFrontier {
                defender,
                attacker,
                gamma,
                capture_radius,
            } => {
                let dd = (*q - *defender).norm_squared();
                if *capture_radius == 0.0 {
                    // (gamma*||q-a||)^2 expands exactly; avoids the sqrt
                    // round-trip so the gamma = 1 case matches the Voronoi
                    // predicate bit for bit.
                    gamma * gamma * (*q - *attacker).norm_squared() - dd
                } else {
                    let s = (*q - *attacker).norm();
                    let reach = gamma * s + capture_radius;
                    reach * reach - dd
                }
            }
        }
    }

    /// Gradient of [`ConstraintAtom::value`] with respect to `q`. At the
    /// capture frontier's nondifferentiable point `q = attacker` the norm
    /// term contributes the zero direction.
    pub fn gradient(&self, q: &Vector) -> Result<Vector> {
        self.check_query(q)?;
        Ok(self.gradient_unchecked(q))
    }

    #[inline]
    pub(crate) fn gradient_unchecked(&self, q: &Vector) -> Vector {
        match self {
            ConstraintAtom::Affine { normal, .. } => *normal,
            ConstraintAtom::Ball { center, .. } => (*q - *center) * 2.0,
            ConstraintAtom::AxisCylinder { axis, center, .. } => {
                let mut g = Vector::zeros(q.dim());
                let mut c = 0;
                for k in 0..q.dim() {
                    if k != *axis {
                        g[k] = 2.0 * (q[k] - center[c]);
                        c += 1;
                    }
                }
                g
            }
            ConstraintAtom::CaptureFrontier {
                defender,
                attacker,
                gamma,
                capture_radius,
            } => {
                let qa = *q - *attacker;
                let qd = *q - *defender;
                let mut g = qa * (2.0 * gamma * gamma) - qd * 2.0;
                if *capture_radius > 0.0 {
                    let s = qa.norm();
                    if s > FRONTIER_NORM_GUARD {
                        g += qa * (2.0 * capture_radius * gamma / s);
                    }
                }
                g
            }
        }
    }

    /// Hessian of [`ConstraintAtom::value`] with respect to `q`.
    pub(crate) fn hessian_unchecked(&self, q: &Vector) -> Hessian {
        let n = self.dim();
        match self {
            ConstraintAtom::Affine { .. } => Hessian::zeros(n),
            ConstraintAtom::Ball { .. } => Hessian::identity_scaled(n, 2.0),
            ConstraintAtom::AxisCylinder { axis, .. } => {
                let mut h = Hessian::zeros(n);
                for k in 0..n {
                    if k != *axis {
                        h.data[k][k] = 2.0;
                    }
                }
                h
            }
            ConstraintAtom::CaptureFrontier {
                attacker,
                gamma,
                capture_radius,
                ..
            } => {
                let base = 2.0 * (gamma * gamma - 1.0);
                let mut h = Hessian::identity_scaled(n, base);
                if *capture_radius > 0.0 {
                    let qa = *q - *attacker;
                    let s = qa.norm();
                    if s > FRONTIER_NORM_GUARD {
                        // 2 r gamma * (I - u u^T) / s, the Hessian of the
                        // norm term. PSD for s > 0.
                        let c = 2.0 * capture_radius * gamma / s;
                        for i in 0..n {
                            h.data[i][i] += c;
                            for j in 0..n {
                                h.data[i][j] -= c * qa[i] * qa[j] / (s * s);
                            }
                        }
                    } else {
                        for i in 0..n {
                            h.data[i][i] += 1e-12;
                        }
                    }
                }
                h
            }
        }
    }
}

/// Partial derivatives of the capture-frontier value with respect to the
/// defender and attacker positions, evaluated at a fixed query point `q`:
/// `d c / d defender = 2 (q - defender)` and
/// `d c / d attacker = -2 zeta (q - attacker)` with
/// `zeta = gamma^2 + capture_radius * gamma / ||q - attacker||`.
///
/// Errors with [`Error::DegeneratePoint`] when `q` coincides with the
/// attacker position.
pub fn capture_frontier_param_gradients(
    atom: &ConstraintAtom,
    q: &Vector,
) -> Result<(Vector, Vector)> {
    let ConstraintAtom::CaptureFrontier {
        defender,
        attacker,
        gamma,
        capture_radius,
    } = atom
    else {
        return Err(Error::invalid(
            "parameter gradients are only defined for capture frontiers",
        ));
    };
    q.check_dim(defender.dim())?;
    let qa = *q - *attacker;
    let s = qa.norm();
    if s <= FRONTIER_NORM_GUARD {
        return Err(Error::DegeneratePoint);
    }
    let grad_defender = (*q - *defender) * 2.0;
    let zeta = gamma * gamma + capture_radius * gamma / s;
    let grad_attacker = qa * (-2.0 * zeta);
    Ok((grad_defender, grad_attacker))
}

/// Intersection of constraint atoms. An empty atom list is all of space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexRegion {
    dim: usize,
    atoms: Vec<ConstraintAtom>,
}

impl ConvexRegion {
    /// The whole space in the given dimension.
    pub fn all(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM);
        ConvexRegion {
            dim,
            atoms: Vec::new(),
        }
    }

    pub fn from_atoms(dim: usize, atoms: Vec<ConstraintAtom>) -> Result<Self> {
        for a in &atoms {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.dim(),
                });
            }
        }
        Ok(ConvexRegion { dim, atoms })
    }

    /// Axis-aligned box `lo <= q <= hi`.
    pub fn bounding_box(lo: &Vector, hi: &Vector) -> Result<Self> {
        lo.check_dim(hi.dim())?;
        let n = lo.dim();
        let mut atoms = Vec::with_capacity(2 * n);
        for k in 0..n {
            if lo[k] >= hi[k] {
                return Err(Error::invalid(format!(
                    "box bounds must satisfy lo < hi per coordinate, got [{}, {}]",
                    lo[k], hi[k]
                )));
            }
            let mut up = Vector::zeros(n);
            up[k] = 1.0;
            atoms.push(ConstraintAtom::affine(up, -hi[k]));
            let mut down = Vector::zeros(n);
            down[k] = -1.0;
            atoms.push(ConstraintAtom::affine(down, lo[k]));
        }
        Ok(ConvexRegion { dim: n, atoms })
    }

    pub fn ball(center: Vector, radius: f64) -> Self {
        let dim = center.dim();
        ConvexRegion {
            dim,
            atoms: vec![ConstraintAtom::ball(center, radius)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[ConstraintAtom] {
        &self.atoms
    }

    pub fn push(&mut self, atom: ConstraintAtom) -> Result<()> {
        if atom.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: atom.dim(),
            });
        }
        self.atoms.push(atom);
        Ok(())
    }

    /// Intersection with another region over the same space.
    pub fn intersect(&self, other: &ConvexRegion) -> Result<ConvexRegion> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Ok(ConvexRegion {
            dim: self.dim,
            atoms,
        })
    }

    /// Largest atom value at `q`, `-inf` for the unconstrained region.
    pub fn max_value(&self, q: &Vector) -> Result<f64> {
        q.check_dim(self.dim)?;
        let mut worst = f64::NEG_INFINITY;
        for a in &self.atoms {
            worst = worst.max(a.value_unchecked(q));
        }
        Ok(worst)
    }

    /// Membership test: true iff every atom value is at most `eps`.
    pub fn contains(&self, q: &Vector, eps: f64) -> Result<bool> {
        debug_assert!(eps >= 0.0);
        q.check_dim(self.dim)?;
        Ok(self
            .atoms
            .iter()
            .all(|a| a.value_unchecked(q) <= eps))
    }
}

/// Membership with the default tolerance of [`EPS_MEMBERSHIP`].
pub fn region_contains(region: &ConvexRegion, q: &Vector, eps: f64) -> Result<bool> {
    region.contains(q, eps)
}

/// Safe-reachable set of one attacker against a coalition of defenders:
/// the domain atoms followed by one capture frontier per defender, in the
/// order the defenders are listed. Callers that map solver constraint
/// indices back to defenders rely on that ordering.
pub fn build_srs(
    defender_positions: &[Vector],
    attacker_position: &Vector,
    gammas: &[f64],
    radii: &[f64],
    domain: &ConvexRegion,
) -> Result<ConvexRegion> {
    if defender_positions.len() != gammas.len() || defender_positions.len() != radii.len() {
        return Err(Error::invalid(
            "defender positions, gammas, and radii must have equal lengths",
        ));
    }
    attacker_position.check_dim(domain.dim())?;
    let mut region = domain.clone();
    for ((d, gamma), r) in defender_positions.iter().zip(gammas).zip(radii) {
        region.push(ConstraintAtom::capture_frontier(
            *d,
            *attacker_position,
            *gamma,
            *r,
        )?)?;
    }
    Ok(region)
}

/// Euclidean projection of `q` onto the domain; identity when `q` is
/// already inside. Axis-aligned box domains are clamped coordinate-wise;
/// anything else goes through the projection program of the solver module.
pub fn project_to_domain(domain: &ConvexRegion, q: &Vector) -> Result<Vector> {
    q.check_dim(domain.dim())?;
    if domain.contains(q, 0.0)? {
        return Ok(*q);
    }
    if let Some(projected) = clamp_if_axis_aligned(domain, q) {
        return Ok(projected);
    }
    let mut scratch = crate::solver::CheckCounter::new();
    let result = crate::solver::solve_projection(q, domain, &mut scratch)?;
    match result.status {
        crate::solver::SolveStatus::Infeasible => Err(Error::SolverFailure(
            "cannot project onto an empty domain".into(),
        )),
        _ => Ok(result.primal_q),
    }
}

/// Coordinate-wise clamp for domains made only of axis-aligned halfspaces.
fn clamp_if_axis_aligned(domain: &ConvexRegion, q: &Vector) -> Option<Vector> {
    let n = domain.dim();
    let mut lo = [f64::NEG_INFINITY; MAX_DIM];
    let mut hi = [f64::INFINITY; MAX_DIM];
    for atom in domain.atoms() {
        let ConstraintAtom::Affine { normal, offset } = atom else {
            return None;
        };
        let mut axis = None;
        for k in 0..n {
            if normal[k] != 0.0 {
                if axis.is_some() {
                    return None;
                }
                axis = Some(k);
            }
        }
        let k = axis?;
        // normal[k] * q_k + offset <= 0
        let bound = -offset / normal[k];
        if normal[k] > 0.0 {
            hi[k] = hi[k].min(bound);
        } else {
            lo[k] = lo[k].max(bound);
        }
    }
    let mut out = *q;
    for k in 0..n {
        if lo[k] > hi[k] {
            return None;
        }
        out[k] = out[k].clamp(lo[k], hi[k]);
    }
    Some(out)
}
