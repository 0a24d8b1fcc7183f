//! Samplers for the distribution families used in the experiments.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::latitude::VmfLatitude;
use crate::error::{invalid, Error, Result};
use crate::geometry::{complement_basis, norm, UnitVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmfParams {
    pub theta: UnitVector,
    pub kappa: f64,
}

impl VmfParams {
    pub fn new(theta: UnitVector, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(invalid(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        Ok(Self { theta, kappa })
    }
}

/// Tangent vMF law: `Z = Vθ + sqrt(1 - V^2) Γ_θ U` with `V = 2 Beta(a, b) - 1`
/// and `U ~ vMF(mu, kappa)` on `S^(d-2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVmfParams {
    pub theta: UnitVector,
    pub mu: UnitVector,
    pub kappa: f64,
    pub beta_a: f64,
    pub beta_b: f64,
}

impl TangentVmfParams {
    pub fn new(theta: UnitVector, mu: UnitVector, kappa: f64, beta_a: f64, beta_b: f64) -> Result<Self> {
        if mu.dim() + 1 != theta.dim() {
            return Err(Error::DimensionMismatch { expected: theta.dim() - 1, found: mu.dim() });
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(invalid(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        if !(beta_a > 0.0 && beta_b > 0.0 && beta_a.is_finite() && beta_b.is_finite()) {
            return Err(invalid("beta parameters must be positive"));
        }
        Ok(Self { theta, mu, kappa, beta_a, beta_b })
    }
}

/// Sine-skewed circular vMF: density `f(φ - mu) (1 + lambda sin(φ - mu))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineSkewParams {
    pub mu: f64,
    pub lambda: f64,
    pub base_kappa: f64,
}

impl SineSkewParams {
    pub fn new(mu: f64, lambda: f64, base_kappa: f64) -> Result<Self> {
        if lambda.is_nan() || lambda.abs() >= 1.0 {
            return Err(invalid(format!("|lambda| must be < 1, got {lambda}")));
        }
        if !(base_kappa >= 0.0 && base_kappa.is_finite()) {
            return Err(invalid("base kappa must be finite and >= 0"));
        }
        if !mu.is_finite() {
            return Err(invalid("mu must be finite"));
        }
        Ok(Self { mu, lambda, base_kappa })
    }
}

/// Normalized standard Gaussian vector.
fn gaussian_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-300 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Uniform direction on `S^(k-1)`; for `k = 1` a random sign.
fn sphere_direction<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    if k == 1 {
        vec![if rng.random::<bool>() { 1.0 } else { -1.0 }]
    } else {
        gaussian_direction(k, rng)
    }
}

pub fn sample_uniform<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Vec<UnitVector>> {
    if d < 2 {
        return Err(invalid(format!("dimension must be >= 2, got {d}")));
    }
    Ok((0..n).map(|_| UnitVector::from_unit_unchecked(gaussian_direction(d, rng))).collect())
}

/// Wood's rejection sampler for the vMF latitude `W = Z'θ`.
struct WoodLatitude {
    kappa: f64,
    dm1: f64,
    b: f64,
    x0: f64,
    c: f64,
    beta: Beta<f64>,
}

impl WoodLatitude {
    fn new(kappa: f64, d: usize) -> Self {
        let dm1 = d as f64 - 1.0;
        // b written to avoid cancellation when kappa is large
        let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let c = kappa * x0 + dm1 * (1.0 - x0 * x0).ln();
        let beta = Beta::new(0.5 * dm1, 0.5 * dm1).expect("valid beta shape");
        Self { kappa, dm1, b, x0, c, beta }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let z = self.beta.sample(rng);
            let w = (1.0 - (1.0 + self.b) * z) / (1.0 - (1.0 - self.b) * z);
            let u: f64 = rng.random();
            if self.kappa * w + self.dm1 * (1.0 - self.x0 * w).ln() - self.c >= u.ln() {
                return w.clamp(-1.0, 1.0);
            }
        }
    }
}

/// Composes `v θ + sqrt(1 - v^2) Γ s`.
fn compose(v: f64, theta: &[f64], gamma_s: &[f64]) -> UnitVector {
    let r = (1.0 - v * v).max(0.0).sqrt();
    let x: Vec<f64> = theta.iter().zip(gamma_s).map(|(t, g)| v * t + r * g).collect();
    UnitVector::normalize(x).expect("composition of orthogonal unit parts is non-zero")
}

pub fn sample_vmf<R: Rng + ?Sized>(n: usize, params: &VmfParams, rng: &mut R) -> Vec<UnitVector> {
    let d = params.theta.dim();
    if params.kappa == 0.0 {
        return sample_uniform(n, d, rng).expect("d >= 2 by construction");
    }
    let wood = WoodLatitude::new(params.kappa, d);
    let basis = complement_basis(&params.theta);
    (0..n)
        .map(|_| {
            let w = wood.draw(rng);
            let s = sphere_direction(d - 1, rng);
            compose(w, params.theta.as_slice(), &basis.embed(&s))
        })
        .collect()
}

pub fn sample_tangent_vmf<R: Rng + ?Sized>(n: usize, params: &TangentVmfParams, rng: &mut R) -> Vec<UnitVector> {
    let beta = Beta::new(params.beta_a, params.beta_b).expect("validated beta shape");
    let basis = complement_basis(&params.theta);
    let inner = VmfParams { theta: params.mu.clone(), kappa: params.kappa };
    (0..n)
        .map(|_| {
            let v = 2.0 * beta.sample(rng) - 1.0;
            let u = sample_vmf(1, &inner, rng).pop().expect("one draw");
            compose(v, params.theta.as_slice(), &basis.embed(u.as_slice()))
        })
        .collect()
}

pub fn sample_sine_skew<R: Rng + ?Sized>(n: usize, params: &SineSkewParams, rng: &mut R) -> Vec<UnitVector> {
    let base = VmfLatitude::new(params.base_kappa, 2).expect("validated kappa");
    (0..n)
        .map(|_| {
            // inversion for |φ0| via the latitude cos φ0, then a symmetric sign
            let p: f64 = rng.random();
            let mut phi = base.quantile(p).acos();
            if rng.random::<bool>() {
                phi = -phi;
            }
            let keep: f64 = rng.random();
            if keep >= 0.5 * (1.0 + params.lambda * phi.sin()) {
                phi = -phi;
            }
            let angle = phi + params.mu;
            UnitVector::from_unit_unchecked(vec![angle.cos(), angle.sin()])
        })
        .collect()
}
