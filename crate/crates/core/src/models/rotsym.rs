//! Closed-form transport of a rotationally symmetric law to the uniform one.

use super::latitude::{q_star_unchecked, LatitudeCdf};
use crate::error::{Error, Result};
use crate::geometry::{decompose, UnitVector};

/// `F(z) = F*(z'θ) θ + sqrt(1 - F*(z'θ)^2) S_θ(z)` with `F* = Q_* ∘ F_f`, where
/// `F_f` is the latitude CDF of the law being transported.
pub fn rotsym_transport(z: &UnitVector, theta: &UnitVector, latitude_cdf: &LatitudeCdf) -> Result<UnitVector> {
    let d = theta.dim();
    if z.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: z.dim() });
    }
    if latitude_cdf.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: latitude_cdf.dim() });
    }
    let parts = decompose(z.as_slice(), theta.as_slice());
    let lat = latitude_map(parts.latitude, d, latitude_cdf);
    if parts.is_polar() {
        let s = if lat >= 0.0 { 1.0 } else { -1.0 };
        return Ok(if s > 0.0 { theta.clone() } else { theta.neg() });
    }
    let r = (1.0 - lat * lat).max(0.0).sqrt();
    let x: Vec<f64> = theta.as_slice().iter().zip(&parts.sign).map(|(t, s)| lat * t + r * s).collect();
    UnitVector::normalize(x)
}

/// Univariate latitude map `Q_* ∘ F_f`.
pub fn latitude_map(t: f64, d: usize, latitude_cdf: &LatitudeCdf) -> f64 {
    match latitude_cdf {
        LatitudeCdf::Uniform { .. } => t.clamp(-1.0, 1.0),
        _ => q_star_unchecked(latitude_cdf.cdf(t), d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{decompose, norm};
    use crate::models::samplers::sample_uniform;
    use crate::rng::stream;

    #[test]
    fn uniform_law_gives_identity() {
        let mut rng = stream(1, "t", 0);
        let theta = UnitVector::basis(4, 3);
        let cdf = LatitudeCdf::uniform(4).unwrap();
        for z in sample_uniform(50, 4, &mut rng).unwrap() {
            let f = rotsym_transport(&z, &theta, &cdf).unwrap();
            assert!(norm(&f.as_slice().iter().zip(z.as_slice()).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-12);
        }
    }

    #[test]
    fn d3_vmf_equator_maps_to_closed_form_latitude() {
        let theta = UnitVector::basis(3, 2);
        let cdf = LatitudeCdf::vmf(1.0, 3).unwrap();
        let z = UnitVector::basis(3, 0);
        let f = rotsym_transport(&z, &theta, &cdf).unwrap();
        assert!((f[2] + 0.462_117_157_260_009_8).abs() < 1e-9);
    }

    #[test]
    fn sign_is_preserved_and_latitude_map_monotone() {
        let mut rng = stream(2, "t", 0);
        let theta = UnitVector::normalize(vec![1.0, -2.0, 0.5]).unwrap();
        let cdf = LatitudeCdf::vmf(2.5, 3).unwrap();
        for z in sample_uniform(200, 3, &mut rng).unwrap() {
            let f = rotsym_transport(&z, &theta, &cdf).unwrap();
            let a = decompose(z.as_slice(), theta.as_slice()).sign;
            let b = decompose(f.as_slice(), theta.as_slice()).sign;
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
        }
        let mut prev = -1.0;
        for k in 0..=1000 {
            let t = -1.0 + 2.0 * k as f64 / 1000.0;
            let m = latitude_map(t, 3, &cdf);
            assert!(m >= prev);
            prev = m;
        }
    }
}
