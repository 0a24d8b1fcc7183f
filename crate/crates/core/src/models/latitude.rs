//! Distribution functions of the latitude `Z'θ` and their inverses.
//!
//! Integrals over `s in [-1, t]` with weight `(1 - s^2)^((d-3)/2)` are taken
//! in the angle `φ = asin s`, where the weight becomes `cos^(d-2) φ` and
//! stays bounded for every `d >= 2`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::quadrature::adaptive_simpson;
use crate::special::ln_gamma;

const QUAD_TOL: f64 = 1e-14;
const BISECTION_TOL: f64 = 1e-12;

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(invalid(format!("dimension must be >= 2, got {d}")));
    }
    Ok(())
}

fn check_latitude(u: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&u) {
        return Err(invalid(format!("latitude {u} outside [-1, 1]")));
    }
    Ok(())
}

fn check_prob(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

fn cos_power(phi: f64, k: i32) -> f64 {
    phi.cos().max(0.0).powi(k)
}

/// Latitude CDF of the uniform law on `S^(d-1)`.
pub fn f_star(u: f64, d: usize) -> Result<f64> {
    check_dim(d)?;
    check_latitude(u)?;
    Ok(f_star_unchecked(u, d))
}

pub(crate) fn f_star_unchecked(u: f64, d: usize) -> f64 {
    match d {
        2 => 1.0 - u.clamp(-1.0, 1.0).acos() / PI,
        3 => 0.5 * (u + 1.0),
        _ => {
            if u > 0.0 {
                return 1.0 - f_star_unchecked(-u, d);
            }
            let k = (d - 2) as i32;
            let total = PI.sqrt() * (ln_gamma(0.5 * (d as f64 - 1.0)) - ln_gamma(0.5 * d as f64)).exp();
            let upper = u.clamp(-1.0, 1.0).asin();
            adaptive_simpson(|phi| cos_power(phi, k), -FRAC_PI_2, upper, QUAD_TOL) / total
        }
    }
}

/// Quantile function of [`f_star`].
pub fn q_star(p: f64, d: usize) -> Result<f64> {
    check_dim(d)?;
    check_prob(p)?;
    Ok(q_star_unchecked(p, d))
}

pub(crate) fn q_star_unchecked(p: f64, d: usize) -> f64 {
    match d {
        2 => (PI * (1.0 - p)).cos(),
        3 => 2.0 * p - 1.0,
        _ => {
            if p <= 0.0 {
                return -1.0;
            }
            if p >= 1.0 {
                return 1.0;
            }
            bisect(|u| f_star_unchecked(u, d), p)
        }
    }
}

/// Smallest-bracket bisection for a non-decreasing `cdf` on `[-1, 1]`.
fn bisect<F: Fn(f64) -> f64>(cdf: F, p: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Latitude law of the vMF distribution on `S^(d-1)` with concentration `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmfLatitude {
    kappa: f64,
    d: usize,
    norm: f64,
}

// above this the expm1 form of the d = 3 closed form overflows
const LARGE_KAPPA: f64 = 300.0;

impl VmfLatitude {
    pub fn new(kappa: f64, d: usize) -> Result<Self> {
        check_dim(d)?;
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(invalid(format!("concentration must be finite and >= 0, got {kappa}")));
        }
        let norm = if kappa == 0.0 || d == 3 {
            1.0
        } else {
            adaptive_simpson(|phi| Self::weight(kappa, d, phi), -FRAC_PI_2, FRAC_PI_2, QUAD_TOL)
        };
        Ok(Self { kappa, d, norm })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    // e^{κ(sin φ − 1)} cos^{d−2} φ, scaled so the peak is at most 1
    fn weight(kappa: f64, d: usize, phi: f64) -> f64 {
        (kappa * (phi.sin() - 1.0)).exp() * cos_power(phi, (d - 2) as i32)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let t = t.clamp(-1.0, 1.0);
        let k = self.kappa;
        if k == 0.0 {
            return f_star_unchecked(t, self.d);
        }
        if self.d == 3 {
            return if k < LARGE_KAPPA {
                (k * (t + 1.0)).exp_m1() / (2.0 * k).exp_m1()
            } else {
                ((k * (t - 1.0)).exp() - (-2.0 * k).exp()) / (1.0 - (-2.0 * k).exp())
            };
        }
        let phi = t.asin();
        let w = |x| Self::weight(k, self.d, x);
        // integrate over the lighter tail
        if t <= 0.0 {
            (adaptive_simpson(w, -FRAC_PI_2, phi, QUAD_TOL) / self.norm).clamp(0.0, 1.0)
        } else {
            (1.0 - adaptive_simpson(w, phi, FRAC_PI_2, QUAD_TOL) / self.norm).clamp(0.0, 1.0)
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let k = self.kappa;
        if p <= 0.0 {
            return -1.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        if k == 0.0 {
            return q_star_unchecked(p, self.d);
        }
        if self.d == 3 {
            let t = if k < LARGE_KAPPA {
                (p * (2.0 * k).exp_m1()).ln_1p() / k - 1.0
            } else {
                let e = (-2.0 * k).exp();
                1.0 + (p * (1.0 - e) + e).ln() / k
            };
            return t.clamp(-1.0, 1.0);
        }
        bisect(|t| self.cdf(t), p)
    }
}

/// `G_κ(t)`: CDF of `Z'θ` for `Z ~ vMF(θ, κ)` on `S^(d-1)`.
pub fn g_kappa_cdf(t: f64, kappa: f64, d: usize) -> Result<f64> {
    check_latitude(t)?;
    Ok(VmfLatitude::new(kappa, d)?.cdf(t))
}

/// Inverse of [`g_kappa_cdf`] in its first argument.
pub fn g_kappa_inv(p: f64, kappa: f64, d: usize) -> Result<f64> {
    check_prob(p)?;
    Ok(VmfLatitude::new(kappa, d)?.quantile(p))
}

/// Angular density `f` evaluated at the latitude `s = z'θ` (unnormalized).
pub type AngularDensity = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Latitude distribution of a rotationally symmetric law.
#[derive(Clone)]
pub enum LatitudeCdf {
    Uniform { d: usize },
    Vmf(VmfLatitude),
    Angular { d: usize, density: AngularDensity, norm: f64 },
}

impl fmt::Debug for LatitudeCdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { d } => write!(f, "Uniform {{ d: {d} }}"),
            Self::Vmf(v) => write!(f, "Vmf {{ d: {}, kappa: {} }}", v.d, v.kappa),
            Self::Angular { d, .. } => write!(f, "Angular {{ d: {d} }}"),
        }
    }
}

impl LatitudeCdf {
    pub fn uniform(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self::Uniform { d })
    }

    pub fn vmf(kappa: f64, d: usize) -> Result<Self> {
        Ok(Self::Vmf(VmfLatitude::new(kappa, d)?))
    }

    /// Law with density proportional to `density(z'θ)` on `S^(d-1)`.
    pub fn angular(d: usize, density: AngularDensity) -> Result<Self> {
        check_dim(d)?;
        let k = (d - 2) as i32;
        let norm = adaptive_simpson(|phi| density(phi.sin()) * cos_power(phi, k), -FRAC_PI_2, FRAC_PI_2, QUAD_TOL);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("angular density does not integrate to a positive finite value"));
        }
        Ok(Self::Angular { d, density, norm })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Uniform { d } | Self::Angular { d, .. } => *d,
            Self::Vmf(v) => v.d,
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Self::Uniform { d } => f_star_unchecked(t.clamp(-1.0, 1.0), *d),
            Self::Vmf(v) => v.cdf(t),
            Self::Angular { d, density, norm } => {
                let k = (*d - 2) as i32;
                let upper = t.clamp(-1.0, 1.0).asin();
                let mass = adaptive_simpson(|phi| density(phi.sin()) * cos_power(phi, k), -FRAC_PI_2, upper, QUAD_TOL);
                (mass / norm).clamp(0.0, 1.0)
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Self::Uniform { d } => q_star_unchecked(p.clamp(0.0, 1.0), *d),
            Self::Vmf(v) => v.quantile(p),
            Self::Angular { .. } => {
                if p <= 0.0 {
                    -1.0
                } else if p >= 1.0 {
                    1.0
                } else {
                    bisect(|t| self.cdf(t), p)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta_reg;

    #[test]
    fn f_star_examples() {
        assert_eq!(f_star(0.0, 3).unwrap(), 0.5);
        assert!((f_star(0.0, 5).unwrap() - 0.5).abs() < 1e-14);
        assert!(f_star(1.5, 3).is_err());
        for d in 2..9 {
            assert!(f_star(-1.0, d).unwrap().abs() < 1e-10);
            assert!((f_star(1.0, d).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn f_star_matches_incomplete_beta() {
        // s = 2t - 1 turns the weight into a Beta((d-1)/2, (d-1)/2) density
        for d in [4usize, 5, 6, 9] {
            let a = 0.5 * (d as f64 - 1.0);
            for &u in &[-0.9, -0.3, 0.0, 0.5, 0.77] {
                let oracle = beta_reg(a, a, 0.5 * (1.0 + u));
                assert!((f_star(u, d).unwrap() - oracle).abs() < 1e-10, "d={d} u={u}");
            }
        }
    }

    #[test]
    fn q_star_examples() {
        for d in 2..8 {
            assert!(q_star(0.5, d).unwrap().abs() < 1e-11);
            assert_eq!(q_star(1.0, d).unwrap(), 1.0);
            assert_eq!(q_star(0.0, d).unwrap(), -1.0);
        }
        assert_eq!(q_star(0.75, 3).unwrap(), 0.5);
        assert!(q_star(-0.1, 3).is_err());
    }

    #[test]
    fn g_kappa_examples() {
        assert_eq!(g_kappa_cdf(0.0, 0.0, 3).unwrap(), 0.5);
        let e = std::f64::consts::E;
        let closed = (1.0 - 1.0 / e) / (e - 1.0 / e);
        assert!((g_kappa_cdf(0.0, 1.0, 3).unwrap() - closed).abs() < 1e-14);
        assert!((closed - 0.268_941_421_369_995_1).abs() < 1e-12);
        let p = g_kappa_cdf(0.3, 2.0, 5).unwrap();
        assert!((g_kappa_inv(p, 2.0, 5).unwrap() - 0.3).abs() < 1e-9);
    }

    #[test]
    fn g_kappa_d3_closed_form_agrees_with_quadrature() {
        let k = 1.7;
        let norm = adaptive_simpson(|phi| VmfLatitude::weight(k, 3, phi), -FRAC_PI_2, FRAC_PI_2, 1e-14);
        for &t in &[-0.8f64, -0.1, 0.4, 0.95] {
            let q = adaptive_simpson(|phi| VmfLatitude::weight(k, 3, phi), -FRAC_PI_2, t.asin(), 1e-14) / norm;
            assert!((q - g_kappa_cdf(t, k, 3).unwrap()).abs() < 1e-11);
        }
    }

    #[test]
    fn kappa_zero_reduces_to_f_star() {
        for d in [2usize, 4, 6] {
            for &t in &[-0.7, 0.0, 0.2] {
                assert_eq!(g_kappa_cdf(t, 0.0, d).unwrap(), f_star(t, d).unwrap());
            }
        }
    }

    #[test]
    fn large_kappa_branch_is_continuous() {
        let below = VmfLatitude::new(LARGE_KAPPA * 0.999_999, 3).unwrap();
        let above = VmfLatitude::new(LARGE_KAPPA, 3).unwrap();
        assert!((below.cdf(0.995) - above.cdf(0.995)).abs() < 1e-6);
        assert!((above.quantile(above.cdf(0.99)) - 0.99).abs() < 1e-9);
    }

    #[test]
    fn angular_uniform_density_matches_f_star() {
        let cdf = LatitudeCdf::angular(4, Arc::new(|_| 1.0)).unwrap();
        for &t in &[-0.5, 0.1, 0.6] {
            assert!((cdf.cdf(t) - f_star(t, 4).unwrap()).abs() < 1e-10);
        }
    }
}
