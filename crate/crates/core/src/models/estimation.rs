//! Location and concentration estimators.

use rand::seq::IndexedRandom;

use crate::error::{invalid, Error, Result};
use crate::geometry::{arc, dot, norm, UnitVector};
use crate::models::samplers::sample_uniform;
use crate::rng::stream;
use crate::special::{mean_resultant_length, mean_resultant_length_derivative};

fn check_nonempty(sample: &[UnitVector]) -> Result<usize> {
    let first = sample.first().ok_or_else(|| invalid("empty sample"))?;
    let d = first.dim();
    if let Some(p) = sample.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
    }
    Ok(d)
}

pub(crate) fn euclidean_mean(sample: &[UnitVector]) -> Vec<f64> {
    let d = sample[0].dim();
    let mut m = vec![0.0; d];
    for p in sample {
        for (a, b) in m.iter_mut().zip(p.as_slice()) {
            *a += b;
        }
    }
    let n = sample.len() as f64;
    m.iter_mut().for_each(|a| *a /= n);
    m
}

/// Solves `A_d(κ) = rbar` for the vMF concentration.
pub fn kappa_from_resultant(rbar: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(invalid("dimension must be >= 2"));
    }
    if !(0.0..=1.0).contains(&rbar) {
        return Err(invalid(format!("mean resultant length {rbar} outside [0, 1]")));
    }
    if rbar <= 1e-8 {
        return Ok(0.0);
    }
    if rbar >= 1.0 - 1e-12 {
        return Err(Error::DegenerateConcentration("mean resultant length is 1 (all points identical)".into()));
    }
    let df = d as f64;
    let mut kappa = rbar * (df - rbar * rbar) / (1.0 - rbar * rbar);
    for _ in 0..100 {
        let f = mean_resultant_length(kappa, d) - rbar;
        let slope = mean_resultant_length_derivative(kappa, d);
        let mut next = kappa - f / slope;
        if next.is_nan() || next <= 0.0 || next.is_infinite() {
            next = 0.5 * kappa;
        }
        let done = (next - kappa).abs() <= 1e-13 * kappa.max(1.0);
        kappa = next;
        if done {
            break;
        }
    }
    Ok(kappa)
}

/// Maximum-likelihood vMF concentration of a sample.
pub fn vmf_kappa_mle(sample: &[UnitVector]) -> Result<f64> {
    let d = check_nonempty(sample)?;
    if sample.len() < 2 {
        return Err(invalid("concentration estimate needs at least 2 points"));
    }
    let rbar = norm(&euclidean_mean(sample)).min(1.0);
    kappa_from_resultant(rbar, d)
}

const FRECHET_MAX_ITER: usize = 200;
const FRECHET_STEP_TOL: f64 = 1e-10;
const FRECHET_RANDOM_STARTS: u64 = 4;
const FRECHET_TIE_TOL: f64 = 1e-12;
const FRECHET_SEED: u64 = 0x6d65_616e;

/// Mean of `d^2(Z_i, z) / 2`.
pub fn frechet_objective(sample: &[UnitVector], z: &[f64]) -> f64 {
    sample.iter().map(|p| 0.5 * arc(p.as_slice(), z).powi(2)).sum::<f64>() / sample.len() as f64
}

fn descend(sample: &[UnitVector], start: Vec<f64>) -> Vec<f64> {
    let d = start.len();
    let mut z = start;
    let mut step = vec![0.0; d];
    for _ in 0..FRECHET_MAX_ITER {
        step.iter_mut().for_each(|s| *s = 0.0);
        for p in sample {
            let p = p.as_slice();
            let c = dot(p, &z).clamp(-1.0, 1.0);
            let tangent: Vec<f64> = p.iter().zip(&z).map(|(a, b)| a - c * b).collect();
            let len = norm(&tangent);
            if len < 1e-15 {
                continue;
            }
            let theta = c.acos();
            for (s, t) in step.iter_mut().zip(&tangent) {
                *s += theta * t / len;
            }
        }
        let n = sample.len() as f64;
        step.iter_mut().for_each(|s| *s /= n);
        let size = norm(&step);
        if size < FRECHET_STEP_TOL {
            break;
        }
        let (c, s) = (size.cos(), size.sin());
        let next: Vec<f64> = z.iter().zip(&step).map(|(a, v)| c * a + s * v / size).collect();
        let len = norm(&next);
        z = next.into_iter().map(|x| x / len).collect();
    }
    z
}

/// Fréchet mean with the default multistart seed.
pub fn frechet_mean(sample: &[UnitVector]) -> Result<UnitVector> {
    frechet_mean_seeded(sample, FRECHET_SEED)
}

/// Intrinsic mean minimizing the mean squared geodesic distance. Gradient
/// descent is started from the normalized Euclidean mean and from four
/// random points; among equally good local optima one is drawn at random.
pub fn frechet_mean_seeded(sample: &[UnitVector], seed: u64) -> Result<UnitVector> {
    let d = check_nonempty(sample)?;
    if sample.len() == 1 {
        return Ok(sample[0].clone());
    }
    let mut rng = stream(seed, "frechet", 0);
    let mut starts = Vec::new();
    let m = euclidean_mean(sample);
    if norm(&m) > 1e-12 {
        starts.push(UnitVector::normalize(m)?.into_inner());
    }
    for p in sample_uniform(FRECHET_RANDOM_STARTS as usize, d, &mut rng)? {
        starts.push(p.into_inner());
    }
    let candidates: Vec<(f64, Vec<f64>)> = starts
        .into_iter()
        .map(|s| {
            let z = descend(sample, s);
            (frechet_objective(sample, &z), z)
        })
        .collect();
    let best = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let ties: Vec<&(f64, Vec<f64>)> = candidates.iter().filter(|c| c.0 <= best + FRECHET_TIE_TOL).collect();
    let chosen = ties.choose(&mut rng).expect("at least one candidate");
    UnitVector::normalize(chosen.1.clone())
}
