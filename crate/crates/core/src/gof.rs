//! Cramér–von Mises goodness-of-fit test based on the empirical transport,
//! with Monte Carlo calibration, and the Rayleigh test as a baseline.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{complement_basis, squared_chord, UnitVector};
use crate::grids::GridShape;
use crate::models::{euclidean_mean, rotsym_transport, sample_uniform, LatitudeCdf};
use crate::rng::{stream, StreamRng};
use crate::special::{chi2_quantile, chi2_sf};
use crate::transport::{fit, EmpiricalTransport};

/// Minimum number of Monte Carlo replications for a calibrated test.
pub const MIN_MC: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub test: String,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub n_mc: usize,
    pub seed: u64,
    pub reject: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridShape>,
}

/// Null hypothesis of a rotationally symmetric law.
#[derive(Debug, Clone)]
pub enum NullModel {
    Uniform { d: usize },
    RotSym { theta: UnitVector, latitude: LatitudeCdf },
}

impl NullModel {
    pub fn dim(&self) -> usize {
        match self {
            Self::Uniform { d } => *d,
            Self::RotSym { theta, .. } => theta.dim(),
        }
    }

    /// Population transport `F_0` of the null law.
    pub fn transport(&self, z: &UnitVector) -> Result<UnitVector> {
        match self {
            Self::Uniform { .. } => Ok(z.clone()),
            Self::RotSym { theta, latitude } => rotsym_transport(z, theta, latitude),
        }
    }

    pub fn sample(&self, n: usize, rng: &mut StreamRng) -> Result<Vec<UnitVector>> {
        match self {
            Self::Uniform { d } => sample_uniform(n, *d, rng),
            Self::RotSym { theta, latitude } => {
                let d = theta.dim();
                let basis = complement_basis(theta);
                (0..n)
                    .map(|_| {
                        let t = latitude.quantile(rng.random::<f64>());
                        let s = if d == 2 {
                            vec![if rng.random::<bool>() { 1.0 } else { -1.0 }]
                        } else {
                            sample_uniform(1, d - 1, rng)?.remove(0).into_inner()
                        };
                        let g = basis.embed(&s);
                        let r = (1.0 - t * t).max(0.0).sqrt();
                        let x = theta.as_slice().iter().zip(&g).map(|(a, b)| t * a + r * b).collect();
                        UnitVector::normalize(x)
                    })
                    .collect()
            }
        }
    }
}

/// `T_n = n^{-1} Σ ||F^(n)(Z_i) - F_0(Z_i)||^2` for the structured fit.
pub fn cvm_statistic<F>(sample: &[UnitVector], null_transport: F, shape: GridShape, seed: u64) -> Result<f64>
where
    F: Fn(&UnitVector) -> Result<UnitVector>,
{
    cvm_from_fit(&fit(sample, shape, seed)?, null_transport)
}

/// `T_n` for an already fitted transport.
pub fn cvm_from_fit<F>(t: &EmpiricalTransport, null_transport: F) -> Result<f64>
where
    F: Fn(&UnitVector) -> Result<UnitVector>,
{
    let mut total = 0.0;
    for (i, z) in t.sample().iter().enumerate() {
        let f0 = null_transport(z)?;
        total += squared_chord(t.image(i).as_slice(), f0.as_slice());
    }
    Ok(total / t.len() as f64)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// Monte Carlo null distribution of `T_n` for a fixed sample size and grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullCalibration {
    pub n: usize,
    pub d: usize,
    pub shape: GridShape,
    pub seed: u64,
    /// Null statistics ordered by replication index.
    pub draws: Vec<f64>,
    #[serde(skip)]
    sorted: Vec<f64>,
}

impl NullCalibration {
    /// Replication `r` draws its null sample from the stream
    /// `(seed, "gof-null", r)`; every fit reuses `seed` for the pole step,
    /// exactly as the observed statistic does.
    pub fn build(null: &NullModel, n: usize, shape: GridShape, n_mc: usize, seed: u64) -> Result<Self> {
        if n_mc < MIN_MC {
            return Err(invalid(format!("n_mc must be >= {MIN_MC}, got {n_mc}")));
        }
        shape.check_size(n)?;
        let draws = (0..n_mc)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(seed, "gof-null", r as u64);
                let sample = null.sample(n, &mut rng)?;
                cvm_statistic(&sample, |z| null.transport(z), shape, seed)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self::from_draws(n, null.dim(), shape, seed, draws))
    }

    pub fn from_draws(n: usize, d: usize, shape: GridShape, seed: u64, draws: Vec<f64>) -> Self {
        let mut sorted = draws.clone();
        sorted.sort_by(f64::total_cmp);
        Self { n, d, shape, seed, draws, sorted }
    }

    fn sorted(&self) -> std::borrow::Cow<'_, [f64]> {
        if self.sorted.len() == self.draws.len() {
            std::borrow::Cow::Borrowed(&self.sorted)
        } else {
            let mut s = self.draws.clone();
            s.sort_by(f64::total_cmp);
            std::borrow::Cow::Owned(s)
        }
    }

    /// The `ceil((1 - alpha) B)`-th smallest null draw (at least the first).
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let s = self.sorted();
        let b = s.len();
        let k = (((1.0 - alpha) * b as f64).ceil() as usize).clamp(1, b);
        Ok(s[k - 1])
    }

    /// `(1 + #{T_b >= t}) / (B + 1)`.
    pub fn p_value(&self, t: f64) -> f64 {
        let s = self.sorted();
        let below = s.partition_point(|&x| x < t);
        (1 + s.len() - below) as f64 / (s.len() + 1) as f64
    }

    /// Full test of `sample` against this calibration.
    pub fn test(&self, sample: &[UnitVector], null: &NullModel, alpha: f64) -> Result<GofReport> {
        if sample.len() != self.n {
            return Err(Error::SizeMismatch(format!(
                "calibration built for n = {}, sample has {}",
                self.n,
                sample.len()
            )));
        }
        let statistic = cvm_statistic(sample, |z| null.transport(z), self.shape, self.seed)?;
        let critical_value = self.critical_value(alpha)?;
        Ok(GofReport {
            test: "cvm".into(),
            statistic,
            critical_value,
            p_value: self.p_value(statistic),
            alpha,
            n_mc: self.draws.len(),
            seed: self.seed,
            reject: statistic > critical_value,
            grid: Some(self.shape),
        })
    }
}

/// `(1 - alpha)` Monte Carlo quantile of `T_n` under uniformity.
pub fn mc_critical_value(n: usize, d: usize, shape: GridShape, alpha: f64, n_mc: usize, seed: u64) -> Result<f64> {
    check_alpha(alpha)?;
    NullCalibration::build(&NullModel::Uniform { d }, n, shape, n_mc, seed)?.critical_value(alpha)
}

/// Tests uniformity with the default `n_R ≈ n_S ≈ sqrt(n)` grid.
pub fn test_uniformity(sample: &[UnitVector], alpha: f64, n_mc: usize, seed: u64) -> Result<GofReport> {
    let d = sample.first().ok_or_else(|| invalid("empty sample"))?.dim();
    let shape = GridShape::auto(sample.len(), d)?;
    test_null(sample, &NullModel::Uniform { d }, shape, alpha, n_mc, seed)
}

pub fn test_null(
    sample: &[UnitVector],
    null: &NullModel,
    shape: GridShape,
    alpha: f64,
    n_mc: usize,
    seed: u64,
) -> Result<GofReport> {
    check_alpha(alpha)?;
    let d = sample.first().ok_or_else(|| invalid("empty sample"))?.dim();
    if d != null.dim() {
        return Err(Error::DimensionMismatch { expected: null.dim(), found: d });
    }
    NullCalibration::build(null, sample.len(), shape, n_mc, seed)?.test(sample, null, alpha)
}

/// Rayleigh test: `n d ||mean||^2` against chi-square with `d` degrees of freedom.
pub fn rayleigh_test(sample: &[UnitVector], alpha: f64) -> Result<GofReport> {
    check_alpha(alpha)?;
    if sample.len() < 2 {
        return Err(invalid("Rayleigh test needs at least 2 points"));
    }
    let d = sample[0].dim();
    if let Some(p) = sample.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
    }
    let m = euclidean_mean(sample);
    let statistic = sample.len() as f64 * d as f64 * m.iter().map(|x| x * x).sum::<f64>();
    let critical_value = if alpha < 1.0 { chi2_quantile(1.0 - alpha, d)? } else { 0.0 };
    Ok(GofReport {
        test: "rayleigh".into(),
        statistic,
        critical_value,
        p_value: chi2_sf(statistic, d)?,
        alpha,
        n_mc: 0,
        seed: 0,
        reject: statistic > critical_value,
        grid: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::structured_grid;
    use crate::transport::fit_with_pole;

    #[test]
    fn grid_sample_has_zero_statistic() {
        let shape = GridShape::new(4, 5, 1).unwrap();
        let pole = UnitVector::normalize(vec![0.3, -0.2, 0.9]).unwrap();
        let mut sample = structured_grid(&pole, shape).unwrap().points().to_vec();
        sample.reverse();
        let t = fit_with_pole(&sample, &pole, shape).unwrap();
        assert!(t.total_cost() < 1e-20);
        assert!(cvm_from_fit(&t, |z| Ok(z.clone())).unwrap() < 1e-20);
    }

    #[test]
    fn calibration_quantiles() {
        let cal =
            NullCalibration::from_draws(10, 3, GridShape::new(2, 5, 0).unwrap(), 0, vec![5.0, 1.0, 3.0, 2.0, 4.0]);
        assert_eq!(cal.critical_value(1.0).unwrap(), 1.0);
        assert_eq!(cal.critical_value(0.2).unwrap(), 4.0);
        assert!(cal.critical_value(0.01).unwrap() >= cal.critical_value(0.1).unwrap());
        assert_eq!(cal.p_value(3.0), 4.0 / 6.0);
        assert_eq!(cal.p_value(10.0), 1.0 / 6.0);
        assert!(cal.critical_value(0.0).is_err());
    }

    #[test]
    fn mc_needs_enough_replications() {
        let shape = GridShape::new(2, 2, 0).unwrap();
        assert!(mc_critical_value(4, 3, shape, 0.05, 10, 0).is_err());
        assert!(mc_critical_value(4, 3, shape, 1.5, 200, 0).is_err());
    }

    #[test]
    fn rayleigh_on_identical_points() {
        let sample = vec![UnitVector::basis(3, 0); 20];
        let r = rayleigh_test(&sample, 0.05).unwrap();
        assert!((r.statistic - 60.0).abs() < 1e-12);
        assert!(r.p_value < 1e-10);
        assert!(r.reject);
    }

    #[test]
    fn rotsym_null_sampler_has_the_right_latitudes() {
        let theta = UnitVector::basis(3, 2);
        let null = NullModel::RotSym { theta, latitude: LatitudeCdf::vmf(10.0, 3).unwrap() };
        let xs = null.sample(5000, &mut stream(1, "t", 0)).unwrap();
        let m = xs.iter().map(|x| x[2]).sum::<f64>() / 5000.0;
        assert!((m - (1.0 / 10f64.tanh() - 0.1)).abs() < 0.01);
    }
}
