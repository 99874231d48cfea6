//! Small fixed-capacity Euclidean vectors for 2D/3D positions and gradients.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Maximum spatial dimension supported by the crate.
pub const MAX_DIM: usize = 3;

/// A point or direction in 2 or 3 dimensional Euclidean space, in meters.
///
/// Stored inline so positions stay `Copy` in the solver hot path. All
/// coordinates beyond `dim` are zero, which lets norms and dot products run
/// over the full backing array without branching.
#[derive(Clone, Copy, PartialEq)]
pub struct Vector {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl Vector {
    pub fn new(coords: &[f64]) -> Result<Self> {
        if coords.len() < 1 || coords.len() > MAX_DIM {
            return Err(Error::invalid(format!(
                "vector dimension must be 1..={MAX_DIM}, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("vector coordinates must be finite"));
        }
        let mut v = [0.0; MAX_DIM];
        v[..coords.len()].copy_from_slice(coords);
        Ok(Vector {
            coords: v,
            dim: coords.len(),
        })
    }

    pub fn new2(x: f64, y: f64) -> Self {
        Vector {
            coords: [x, y, 0.0],
            dim: 2,
        }
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Vector {
            coords: [x, y, z],
            dim: 3,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM);
        Vector {
            coords: [0.0; MAX_DIM],
            dim,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    #[inline]
    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut acc = 0.0;
        for k in 0..MAX_DIM {
            acc += self.coords[k] * other.coords[k];
        }
        acc
    }

    #[inline]
    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        (*self - *other).norm()
    }

    /// Direction of `self`, or zero when `self` is zero. Mirrors the
    /// normalizer convention `N(0) = 0` used by every strategy in the crate.
    pub fn normalized_or_zero(&self) -> Vector {
        let n = self.norm();
        if n == 0.0 {
            Vector::zeros(self.dim)
        } else {
            *self * (1.0 / n)
        }
    }

    pub fn scaled(&self, s: f64) -> Vector {
        *self * s
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim != expected {
            Err(Error::DimensionMismatch {
                expected,
                got: self.dim,
            })
        } else {
            Ok(())
        }
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        debug_assert!(i < self.dim);
        &self.coords[i]
    }
}

impl IndexMut<usize> for Vector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        debug_assert!(i < self.dim);
        &mut self.coords[i]
    }
}

impl Add for Vector {
    type Output = Vector;
    #[inline]
    fn add(self, rhs: Vector) -> Vector {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self;
        for k in 0..MAX_DIM {
            out.coords[k] += rhs.coords[k];
        }
        out
    }
}

impl AddAssign for Vector {
    #[inline]
    fn add_assign(&mut self, rhs: Vector) {
        debug_assert_eq!(self.dim, rhs.dim);
        for k in 0..MAX_DIM {
            self.coords[k] += rhs.coords[k];
        }
    }
}

impl Sub for Vector {
    type Output = Vector;
    #[inline]
    fn sub(self, rhs: Vector) -> Vector {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self;
        for k in 0..MAX_DIM {
            out.coords[k] -= rhs.coords[k];
        }
        out
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;
    #[inline]
    fn mul(self, s: f64) -> Vector {
        let mut out = self;
        for k in 0..MAX_DIM {
            out.coords[k] *= s;
        }
        out
    }
}

impl Neg for Vector {
    type Output = Vector;
    #[inline]
    fn neg(self) -> Vector {
        self * -1.0
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_slice())
    }
}

impl Serialize for Vector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim))?;
        for c in self.as_slice() {
            seq.serialize_element(c)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct VecVisitor;
        impl<'de> Visitor<'de> for VecVisitor {
            type Value = Vector;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a sequence of 2 or 3 finite numbers")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Vector, A::Error> {
                let mut coords = Vec::with_capacity(MAX_DIM);
                while let Some(c) = seq.next_element::<f64>()? {
                    coords.push(c);
                }
                Vector::new(&coords).map_err(serde::de::Error::custom)
            }
        }
        deserializer.deserialize_seq(VecVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_respects_dimension() {
        let a = Vector::new2(1.0, 2.0);
        let b = Vector::new2(3.0, -1.0);
        assert_eq!((a + b).as_slice(), &[4.0, 1.0]);
        assert_eq!((a - b).as_slice(), &[-2.0, 3.0]);
        assert_eq!((a * 2.0).as_slice(), &[2.0, 4.0]);
        assert_eq!(a.dot(&b), 1.0);
    }

    #[test]
    fn rejects_nonfinite_and_bad_lengths() {
        assert!(Vector::new(&[f64::NAN, 0.0]).is_err());
        assert!(Vector::new(&[]).is_err());
        assert!(Vector::new(&[0.0; 4]).is_err());
    }

    #[test]
    fn normalizer_maps_zero_to_zero() {
        let z = Vector::zeros(3);
        assert_eq!(z.normalized_or_zero(), z);
        let v = Vector::new2(3.0, 4.0).normalized_or_zero();
        assert!((v.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip() {
        let v = Vector::new3(1.5, -2.0, 0.25);
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, "[1.5,-2.0,0.25]");
        let back: Vector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
    }
}
