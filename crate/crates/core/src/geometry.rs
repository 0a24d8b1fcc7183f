//! Exact spherical primitives: geodesic distance, transport cost,
//! tangent-normal decomposition and equatorial bases.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Inputs whose norm is within this distance of 1 are renormalized.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Below this length the tangent component is treated as zero (pole convention).
const POLE_EPS: f64 = 1e-12;

/// A point on `S^(d-1)`, `d >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Accepts coordinates whose norm is within [`NORM_TOLERANCE`] of 1 and
    /// renormalizes them.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(invalid(format!("unit vectors need dimension >= 2, got {}", coords.len())));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        let norm = norm(&coords);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotUnit { norm });
        }
        // already unit to rounding: keep the exact bits so serialized
        // vectors round-trip unchanged
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Self(coords));
        }
        Ok(Self(coords.into_iter().map(|c| c / norm).collect()))
    }

    /// Normalizes any finite non-zero vector.
    pub fn normalize(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(invalid(format!("unit vectors need dimension >= 2, got {}", coords.len())));
        }
        let norm = norm(&coords);
        if !norm.is_finite() || norm <= f64::MIN_POSITIVE {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        Ok(Self(coords.into_iter().map(|c| c / norm).collect()))
    }

    /// `k`-th canonical basis vector of `R^d` (zero-based `k`).
    pub fn basis(d: usize, k: usize) -> Self {
        assert!(d >= 2 && k < d, "basis({d}, {k}) out of range");
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        Self(v)
    }

    pub(crate) fn from_unit_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!((norm(&coords) - 1.0).abs() < 1e-8);
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    /// Applies a row-major `d x d` orthogonal matrix.
    pub fn rotate(&self, matrix: &[f64]) -> Result<Self> {
        let d = self.dim();
        if matrix.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: matrix.len() });
        }
        let out = (0..d).map(|r| dot(&matrix[r * d..(r + 1) * d], &self.0)).collect();
        Self::normalize(out)
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(u: UnitVector) -> Self {
        u.0
    }
}

impl std::ops::Index<usize> for UnitVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn squared_chord(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(y: &UnitVector, z: &UnitVector) -> Result<()> {
    if y.dim() != z.dim() {
        return Err(Error::DimensionMismatch { expected: y.dim(), found: z.dim() });
    }
    Ok(())
}

/// Great-circle distance `arccos(y'z)` in `[0, pi]`.
pub fn geodesic_distance(y: &UnitVector, z: &UnitVector) -> Result<f64> {
    check_dims(y, z)?;
    Ok(arc(y.as_slice(), z.as_slice()))
}

/// Half the squared geodesic distance.
pub fn transport_cost(y: &UnitVector, z: &UnitVector) -> Result<f64> {
    check_dims(y, z)?;
    Ok(cost(y.as_slice(), z.as_slice()))
}

// 2 atan2(|y - z|, |y + z|) equals arccos(y'z) but keeps full precision
// for nearly equal and nearly antipodal points
#[inline]
pub(crate) fn arc(y: &[f64], z: &[f64]) -> f64 {
    let (mut minus, mut plus) = (0.0, 0.0);
    for (a, b) in y.iter().zip(z) {
        minus += (a - b) * (a - b);
        plus += (a + b) * (a + b);
    }
    2.0 * minus.sqrt().atan2(plus.sqrt())
}

#[inline]
pub(crate) fn cost(y: &[f64], z: &[f64]) -> f64 {
    let a = arc(y, z);
    0.5 * a * a
}

/// Latitude along a pole and unit sign in the equatorial hyperplane.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentDecomposition {
    pub latitude: f64,
    /// Unit vector orthogonal to the pole, or the zero vector at `±pole`.
    pub sign: Vec<f64>,
}

impl TangentDecomposition {
    pub fn is_polar(&self) -> bool {
        self.sign.iter().all(|&s| s == 0.0)
    }

    /// `latitude * pole + sqrt(1 - latitude^2) * sign`.
    pub fn recompose(&self, pole: &UnitVector) -> Vec<f64> {
        let w = (1.0 - self.latitude * self.latitude).max(0.0).sqrt();
        pole.as_slice().iter().zip(&self.sign).map(|(p, s)| self.latitude * p + w * s).collect()
    }
}

pub fn tangent_decompose(u: &UnitVector, pole: &UnitVector) -> Result<TangentDecomposition> {
    check_dims(u, pole)?;
    Ok(decompose(u.as_slice(), pole.as_slice()))
}

pub(crate) fn decompose(u: &[f64], pole: &[f64]) -> TangentDecomposition {
    let latitude = dot(u, pole).clamp(-1.0, 1.0);
    let mut r: Vec<f64> = u.iter().zip(pole).map(|(x, p)| x - latitude * p).collect();
    // second projection pass keeps the sign orthogonal when u is close to the pole
    let drift = dot(&r, pole);
    r.iter_mut().zip(pole).for_each(|(x, p)| *x -= drift * p);
    let len = norm(&r);
    if len < POLE_EPS {
        r.iter_mut().for_each(|x| *x = 0.0);
    } else {
        r.iter_mut().for_each(|x| *x /= len);
    }
    TangentDecomposition { latitude, sign: r }
}

/// Orthonormal basis `Γ` of the hyperplane orthogonal to a pole, stored as a
/// `d x (d-1)` matrix with `Γ'Γ = I` and `ΓΓ' = I - θθ'`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementBasis {
    pole: UnitVector,
    columns: DMatrix<f64>,
}

impl ComplementBasis {
    pub fn pole(&self) -> &UnitVector {
        &self.pole
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// Maps equatorial coordinates `s` in `R^(d-1)` to `Γ s` in `R^d`.
    pub fn embed(&self, s: &[f64]) -> Vec<f64> {
        let d = self.pole.dim();
        assert_eq!(s.len(), d - 1, "equatorial coordinates must have d-1 entries");
        (0..d).map(|r| (0..d - 1).map(|c| self.columns[(r, c)] * s[c]).sum()).collect()
    }

    /// Equatorial coordinates `Γ' v`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let d = self.pole.dim();
        (0..d - 1).map(|c| (0..d).map(|r| self.columns[(r, c)] * v[r]).sum()).collect()
    }
}

/// Householder construction of the equatorial basis.
///
/// For `θ_d >= 0` the reflector sending `θ` to `-e_d` is used, otherwise the
/// one sending `θ` to `e_d`; both give the identity columns `e_1..e_(d-1)` at
/// the canonical poles and never divide by less than 1.
pub fn complement_basis(pole: &UnitVector) -> ComplementBasis {
    let d = pole.dim();
    let t = pole.as_slice();
    let last = t[d - 1];
    let (denom, tail_sign) = if last >= 0.0 { (1.0 + last, -1.0) } else { (1.0 - last, 1.0) };
    let mut columns = DMatrix::zeros(d, d - 1);
    for k in 0..d - 1 {
        for j in 0..d - 1 {
            let delta = if j == k { 1.0 } else { 0.0 };
            columns[(j, k)] = delta - t[j] * t[k] / denom;
        }
        columns[(d - 1, k)] = tail_sign * t[k];
    }
    ComplementBasis { pole: pole.clone(), columns }
}

/// Rotation by `π ξ / 15` about `e_3`.
pub fn rotation_z(xi: f64) -> [[f64; 3]; 3] {
    let angle = std::f64::consts::PI * xi / 15.0;
    let (s, c) = angle.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

pub fn rotation_z_flat(xi: f64) -> Vec<f64> {
    rotation_z(xi).iter().flatten().copied().collect()
}
