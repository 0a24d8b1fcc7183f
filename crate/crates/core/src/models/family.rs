//! Composable data-generating processes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::samplers::{
    sample_sine_skew, sample_tangent_vmf, sample_uniform, sample_vmf, SineSkewParams, TangentVmfParams, VmfParams,
};
use crate::error::{invalid, Error, Result};
use crate::geometry::UnitVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Uniform {
        d: usize,
    },
    Vmf(VmfParams),
    TangentVmf(TangentVmfParams),
    SineSkew(SineSkewParams),
    Mixture(MixtureParams),
    /// Draws from `inner` mapped by the row-major orthogonal `matrix`.
    Rotated {
        matrix: Vec<f64>,
        inner: Box<Family>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub components: Vec<(f64, Family)>,
}

impl MixtureParams {
    pub fn new(components: Vec<(f64, Family)>) -> Result<Self> {
        let first = components.first().ok_or_else(|| invalid("mixture needs a component"))?;
        let d = first.1.dim();
        if components.iter().any(|(w, _)| !(*w >= 0.0 && w.is_finite())) {
            return Err(invalid("mixture weights must be finite and >= 0"));
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("mixture weights sum to {total}, not 1")));
        }
        if let Some((_, f)) = components.iter().find(|(_, f)| f.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: f.dim() });
        }
        Ok(Self { components })
    }
}

impl Family {
    pub fn vmf(theta: UnitVector, kappa: f64) -> Result<Self> {
        Ok(Self::Vmf(VmfParams::new(theta, kappa)?))
    }

    pub fn rotated(matrix: Vec<f64>, inner: Family) -> Result<Self> {
        let d = inner.dim();
        if matrix.len() != d * d {
            return Err(Error::SizeMismatch(format!("rotation has {} entries, expected {}", matrix.len(), d * d)));
        }
        Ok(Self::Rotated { matrix, inner: Box::new(inner) })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Uniform { d } => *d,
            Self::Vmf(p) => p.theta.dim(),
            Self::TangentVmf(p) => p.theta.dim(),
            Self::SineSkew(_) => 2,
            Self::Mixture(m) => m.components.first().map_or(0, |c| c.1.dim()),
            Self::Rotated { inner, .. } => inner.dim(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<UnitVector>> {
        Ok(match self {
            Self::Uniform { d } => sample_uniform(n, *d, rng)?,
            Self::Vmf(p) => sample_vmf(n, p, rng),
            Self::TangentVmf(p) => sample_tangent_vmf(n, p, rng),
            Self::SineSkew(p) => sample_sine_skew(n, p, rng),
            Self::Mixture(m) => {
                let labels: Vec<usize> = (0..n).map(|_| pick(&m.components, rng)).collect();
                let mut pools = Vec::with_capacity(m.components.len());
                for (k, (_, f)) in m.components.iter().enumerate() {
                    let count = labels.iter().filter(|&&l| l == k).count();
                    pools.push(f.sample(count, rng)?.into_iter());
                }
                labels.iter().map(|&l| pools[l].next().expect("pool sized by label count")).collect()
            }
            Self::Rotated { matrix, inner } => {
                inner.sample(n, rng)?.iter().map(|p| p.rotate(matrix)).collect::<Result<_>>()?
            }
        })
    }
}

fn pick<R: Rng + ?Sized>(components: &[(f64, Family)], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, (w, _)) in components.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    components.len() - 1
}
