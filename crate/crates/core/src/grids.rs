//! Target grids for the empirical transport.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{complement_basis, norm, ComplementBasis, UnitVector};
use crate::models::{q_star_unchecked, sample_uniform};
use crate::rng::stream;

const EQUATOR_SEED: u64 = 0x0e9a_7012;

/// Factorization `n = n_R n_S + n_0` of the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    #[serde(alias = "n_R")]
    pub n_r: usize,
    #[serde(alias = "n_S")]
    pub n_s: usize,
    pub n_0: usize,
}

impl GridShape {
    pub fn new(n_r: usize, n_s: usize, n_0: usize) -> Result<Self> {
        let fail = |reason: &str| Error::Factorization { n_r, n_s, n_0, reason: reason.into() };
        if n_r == 0 || n_s == 0 {
            return Err(fail("n_R and n_S must be positive"));
        }
        if n_0 >= n_r.min(n_s) {
            return Err(fail("need n_0 < min(n_R, n_S)"));
        }
        Ok(Self { n_r, n_s, n_0 })
    }

    pub fn total(&self) -> usize {
        self.n_r * self.n_s + self.n_0
    }

    /// Checks that the shape accounts for exactly `n` points.
    pub fn check_size(&self, n: usize) -> Result<()> {
        if self.total() != n {
            return Err(Error::Factorization {
                n_r: self.n_r,
                n_s: self.n_s,
                n_0: self.n_0,
                reason: format!("n_R*n_S + n_0 = {} but n = {n}", self.total()),
            });
        }
        Ok(())
    }

    /// Convenience shape with `n_R ≈ n_S ≈ sqrt(n)`. On the circle the
    /// equator has at most two points, so `n_S = 2` there.
    pub fn auto(n: usize, d: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("cannot build a grid for n = 0"));
        }
        let candidates: Vec<usize> = if d == 2 {
            vec![2, 1]
        } else {
            let base = (n as f64).sqrt().round().max(1.0) as usize;
            let mut c = vec![base];
            for k in 1..=base {
                c.push(base + k);
                if base > k {
                    c.push(base - k);
                }
            }
            c
        };
        for n_s in candidates {
            let n_r = n / n_s;
            if n_r == 0 {
                continue;
            }
            if let Ok(shape) = Self::new(n_r, n_s, n - n_r * n_s) {
                return Ok(shape);
            }
        }
        Err(invalid(format!("no admissible grid factorization for n = {n}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlainGrid {
    pub points: Vec<UnitVector>,
    pub seed: u64,
}

/// Quasi-uniform `n`-point grid: a spherical Fibonacci lattice for `d = 3`,
/// seeded uniform draws otherwise.
pub fn plain_grid(n: usize, d: usize, seed: u64) -> Result<PlainGrid> {
    if n == 0 {
        return Err(invalid("grid size must be >= 1"));
    }
    if d < 2 {
        return Err(invalid(format!("dimension must be >= 2, got {d}")));
    }
    let points = if d == 3 {
        let golden = PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = golden * i as f64;
                UnitVector::from_unit_unchecked(vec![r * phi.cos(), r * phi.sin(), z])
            })
            .collect()
    } else {
        sample_uniform(n, d, &mut stream(seed, "plain-grid", 0))?
    };
    Ok(PlainGrid { points, seed })
}

/// Reference points on the equatorial sphere `S^(d-2)`, in `R^(d-1)`.
pub fn equator_grid(n_s: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    if n_s == 0 {
        return Err(invalid("n_S must be >= 1"));
    }
    match d {
        0 | 1 => Err(invalid(format!("dimension must be >= 2, got {d}"))),
        2 => {
            if n_s > 2 {
                return Err(invalid("the equator of the circle has only two points (n_S <= 2)"));
            }
            Ok([vec![1.0], vec![-1.0]][..n_s].to_vec())
        }
        3 => Ok((0..n_s)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / n_s as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()),
        _ => Ok(plain_grid(n_s, d - 1, EQUATOR_SEED)?.points.into_iter().map(UnitVector::into_inner).collect()),
    }
}

/// Parallels × meridians grid around a pole. Points are ordered as the
/// `n_0` pole copies followed by `(i, j)` in row-major order, `i` indexing
/// parallels from the pole outwards and `j` the equator points.
#[derive(Debug, Clone)]
pub struct StructuredGrid {
    pole: UnitVector,
    basis: ComplementBasis,
    equator: Vec<Vec<f64>>,
    shape: GridShape,
    latitudes: Vec<f64>,
    signs: Vec<Vec<f64>>,
    points: Vec<UnitVector>,
}

pub fn structured_grid(pole: &UnitVector, shape: GridShape) -> Result<StructuredGrid> {
    let shape = GridShape::new(shape.n_r, shape.n_s, shape.n_0)?;
    let d = pole.dim();
    let basis = complement_basis(pole);
    let equator = equator_grid(shape.n_s, d)?;
    let latitudes: Vec<f64> =
        (1..=shape.n_r).map(|i| q_star_unchecked(1.0 - i as f64 / (shape.n_r + 1) as f64, d)).collect();
    let signs: Vec<Vec<f64>> = equator
        .iter()
        .map(|s| {
            let g = basis.embed(s);
            let len = norm(&g);
            g.into_iter().map(|x| x / len).collect()
        })
        .collect();
    let mut points = Vec::with_capacity(shape.total());
    points.extend(std::iter::repeat_n(pole.clone(), shape.n_0));
    for &u in &latitudes {
        let r = (1.0 - u * u).max(0.0).sqrt();
        for s in &signs {
            let x: Vec<f64> = pole.as_slice().iter().zip(s).map(|(p, g)| u * p + r * g).collect();
            points.push(UnitVector::normalize(x)?);
        }
    }
    Ok(StructuredGrid { pole: pole.clone(), basis, equator, shape, latitudes, signs, points })
}

impl StructuredGrid {
    pub fn pole(&self) -> &UnitVector {
        &self.pole
    }

    pub fn basis(&self) -> &ComplementBasis {
        &self.basis
    }

    pub fn equator(&self) -> &[Vec<f64>] {
        &self.equator
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn points(&self) -> &[UnitVector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.pole.dim()
    }

    /// Latitude `Q_*(1 - i/(n_R+1))` of parallel `i` (1-based).
    pub fn latitude(&self, rank: usize) -> f64 {
        if rank == 0 {
            1.0
        } else {
            self.latitudes[rank - 1]
        }
    }

    /// Parallel index of grid point `idx`; 0 for pole copies.
    pub fn rank_of(&self, idx: usize) -> usize {
        if idx < self.shape.n_0 {
            0
        } else {
            1 + (idx - self.shape.n_0) / self.shape.n_s
        }
    }

    /// Equator index of grid point `idx`; `None` for pole copies.
    pub fn meridian_of(&self, idx: usize) -> Option<usize> {
        (idx >= self.shape.n_0).then(|| (idx - self.shape.n_0) % self.shape.n_s)
    }

    /// Tangent sign `Γ s_j` of grid point `idx`; zero for pole copies.
    pub fn sign_of(&self, idx: usize) -> Vec<f64> {
        match self.meridian_of(idx) {
            Some(j) => self.signs[j].clone(),
            None => vec![0.0; self.dim()],
        }
    }
}
