//! Distribution-free rank-score MANOVA and the pseudo-vMF comparator.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, UnitVector};
use crate::grids::{GridShape, StructuredGrid};
use crate::models::{frechet_mean, vmf_kappa_mle, VmfLatitude};
use crate::special::{chi2_quantile, chi2_sf};
use crate::transport::{fit, EmpiricalTransport};

/// Upper clamp of the `G_κ^{-1}` argument, reached only by pole copies.
const RANK_ZERO_CLAMP: f64 = 1.0 - 1e-12;
/// Relative eigenvalue cutoff of the pseudo-inverse.
const PINV_CUTOFF: f64 = 1e-10;

/// Samples from `m >= 2` groups, pooled in group order.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSample {
    groups: Vec<Vec<UnitVector>>,
}

impl PooledSample {
    pub fn new(groups: Vec<Vec<UnitVector>>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(invalid(format!("need at least 2 groups, got {}", groups.len())));
        }
        if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < 2) {
            return Err(invalid(format!("group {} has {} observations; need at least 2", i + 1, g.len())));
        }
        let d = groups[0][0].dim();
        for p in groups.iter().flatten() {
            if p.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
            }
        }
        Ok(Self { groups })
    }

    pub fn groups(&self) -> &[Vec<UnitVector>] {
        &self.groups
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.groups[0][0].dim()
    }

    pub fn pooled(&self) -> Vec<UnitVector> {
        self.groups.iter().flatten().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    Uniform,
    VmfLocation,
    VmfConcentration,
    VmfLocationConcentration,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 4] =
        [ScoreKind::Uniform, ScoreKind::VmfLocation, ScoreKind::VmfConcentration, ScoreKind::VmfLocationConcentration];

    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::VmfLocation => "vmf-location",
            Self::VmfConcentration => "vmf-concentration",
            Self::VmfLocationConcentration => "vmf-location-concentration",
        }
    }

    /// Dimension of the score vector.
    pub fn d_j(self, d: usize) -> usize {
        match self {
            Self::VmfConcentration => 1,
            _ => d,
        }
    }

    pub fn needs_kappa(self) -> bool {
        self != Self::Uniform
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Ok(match key.as_str() {
            "uniform" | "unif" => Self::Uniform,
            "vmf-location" | "location" => Self::VmfLocation,
            "vmf-concentration" | "concentration" => Self::VmfConcentration,
            "vmf-location-concentration" | "location-concentration" => Self::VmfLocationConcentration,
            _ => return Err(invalid(format!("unknown score '{s}'"))),
        })
    }
}

/// Score function with its fitted context (pole, κ̂, grid).
#[derive(Debug, Clone)]
pub struct ScoreFunction {
    kind: ScoreKind,
    pole: UnitVector,
    kappa: f64,
    n_r: usize,
    // G_κ̂^{-1}(1 - r/(n_R+1)) for r = 0..=n_R
    levels: Vec<f64>,
}

impl ScoreFunction {
    pub fn new(kind: ScoreKind, pole: &UnitVector, kappa: f64, n_r: usize) -> Result<Self> {
        let levels = if kind.needs_kappa() {
            let lat = VmfLatitude::new(kappa, pole.dim())?;
            (0..=n_r)
                .map(|r| {
                    let p = (1.0 - r as f64 / (n_r + 1) as f64).clamp(0.0, RANK_ZERO_CLAMP);
                    lat.quantile(p)
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self { kind, pole: pole.clone(), kappa, n_r, levels })
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn d_j(&self) -> usize {
        self.kind.d_j(self.pole.dim())
    }

    /// `G_κ̂^{-1}(1 - rank/(n_R+1))`, clamped for rank 0.
    pub fn level(&self, rank: usize) -> Result<f64> {
        if !self.kind.needs_kappa() {
            return Err(invalid("the uniform score has no latitude level"));
        }
        self.levels.get(rank).copied().ok_or_else(|| invalid(format!("rank {rank} exceeds n_R = {}", self.n_r)))
    }

    /// Score of the grid position with the given image, rank and sign.
    pub fn evaluate(&self, image: &[f64], rank: usize, sign: &[f64]) -> Vec<f64> {
        match self.kind {
            ScoreKind::Uniform => image.to_vec(),
            ScoreKind::VmfLocation => {
                let g = self.levels[rank];
                let r = self.kappa * (1.0 - g * g).max(0.0).sqrt();
                sign.iter().map(|s| r * s).collect()
            }
            ScoreKind::VmfConcentration => vec![self.levels[rank]],
            ScoreKind::VmfLocationConcentration => {
                let g = self.levels[rank];
                let r = (1.0 - g * g).max(0.0).sqrt();
                self.pole.as_slice().iter().zip(sign).map(|(t, s)| self.kappa * (g * t + r * s)).collect()
            }
        }
    }
}

/// Score vectors `J(F^(n)(Y_ℓ))` of every pooled observation.
pub fn score_values(t: &EmpiricalTransport, score: &ScoreFunction) -> Vec<Vec<f64>> {
    (0..t.len()).map(|i| score.evaluate(t.image(i).as_slice(), t.rank(i), &t.sign(i))).collect()
}

/// `D_J = Var(J(U))`: `I_d / d` for the uniform score, otherwise the
/// covariance of the score over the grid positions.
pub fn d_matrix(score: &ScoreFunction, grid: &StructuredGrid) -> DMatrix<f64> {
    let d = grid.dim();
    if score.kind == ScoreKind::Uniform {
        return DMatrix::identity(d, d) / d as f64;
    }
    let k = score.d_j();
    let values: Vec<Vec<f64>> = (0..grid.len())
        .map(|idx| score.evaluate(grid.points()[idx].as_slice(), grid.rank_of(idx), &grid.sign_of(idx)))
        .collect();
    covariance(&values, k)
}

fn covariance(values: &[Vec<f64>], k: usize) -> DMatrix<f64> {
    let n = values.len() as f64;
    let mut mean = DVector::zeros(k);
    for v in values {
        mean += DVector::from_column_slice(v);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(k, k);
    for v in values {
        let c = DVector::from_column_slice(v) - &mean;
        cov += &c * c.transpose();
    }
    cov /= n;
    // exact symmetry
    (&cov + cov.transpose()) * 0.5
}

/// Moore–Penrose inverse of a symmetric PSD matrix and its numerical rank.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
    if !m.is_square() {
        return Err(invalid("pseudo-inverse needs a square matrix"));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return Err(invalid("pseudo-inverse input is not symmetric"));
    }
    let k = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut inv = DMatrix::zeros(k, k);
    let mut rank = 0;
    if lmax > 0.0 {
        for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > PINV_CUTOFF * lmax {
                let q = eig.eigenvectors.column(idx);
                inv += (q * q.transpose()) / lambda;
                rank += 1;
            }
        }
    }
    Ok(((&inv + inv.transpose()) * 0.5, rank))
}

/// `Δ_i = n^{-1/2} Σ_ℓ (a_iℓ - ā_i) J_ℓ` with `a_iℓ = sqrt(n/n_i)` on group
/// `i` and `ā_i = sqrt(n_i/n)`.
pub fn deltas(scores: &[Vec<f64>], sizes: &[usize]) -> Result<Vec<Vec<f64>>> {
    let n: usize = sizes.iter().sum();
    if n != scores.len() {
        return Err(Error::SizeMismatch(format!("{} scores for groups totalling {n}", scores.len())));
    }
    let k = scores.first().map_or(0, Vec::len);
    let nf = n as f64;
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &ni in sizes {
        let a = (nf / ni as f64).sqrt();
        let abar = (ni as f64 / nf).sqrt();
        let mut delta = vec![0.0; k];
        for (l, s) in scores.iter().enumerate() {
            let w = if (start..start + ni).contains(&l) { a - abar } else { -abar };
            for (dv, sv) in delta.iter_mut().zip(s) {
                *dv += w * sv;
            }
        }
        delta.iter_mut().for_each(|x| *x /= nf.sqrt());
        out.push(delta);
        start += ni;
    }
    Ok(out)
}

/// `Σ_i Δ_i' D^- Δ_i`.
pub fn quadratic_form(deltas: &[Vec<f64>], d_inv: &DMatrix<f64>) -> f64 {
    deltas
        .iter()
        .map(|delta| {
            let v = DVector::from_column_slice(delta);
            (v.transpose() * d_inv * &v)[(0, 0)]
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManovaReport {
    pub test: String,
    #[serde(rename = "Q")]
    pub q: f64,
    pub df: usize,
    pub d_star: usize,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub group_sizes: Vec<usize>,
    pub deltas: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridShape>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn decide(q: f64, df: usize, alpha: f64) -> Result<(f64, f64, bool)> {
    if df == 0 {
        return Ok((0.0, 1.0, false));
    }
    let crit = chi2_quantile(1.0 - alpha, df)?;
    Ok((crit, chi2_sf(q, df)?, q > crit))
}

/// Pooled transport shared by every score of one test run.
#[derive(Debug, Clone)]
pub struct PooledFit {
    pub transport: EmpiricalTransport,
    pub sizes: Vec<usize>,
    kappa: Option<f64>,
}

impl PooledFit {
    pub fn new(pooled: &PooledSample, shape: GridShape, seed: u64) -> Result<Self> {
        let transport = fit(&pooled.pooled(), shape, seed)?;
        Ok(Self { transport, sizes: pooled.sizes(), kappa: None })
    }

    /// vMF concentration estimated on the pooled sample (computed once).
    pub fn kappa(&mut self) -> Result<f64> {
        if let Some(k) = self.kappa {
            return Ok(k);
        }
        let k = vmf_kappa_mle(self.transport.sample())?;
        self.kappa = Some(k);
        Ok(k)
    }

    pub fn test(&mut self, kind: ScoreKind, alpha: f64) -> Result<ManovaReport> {
        check_alpha(alpha)?;
        let kappa = if kind.needs_kappa() { Some(self.kappa()?) } else { None };
        let t = &self.transport;
        let score = ScoreFunction::new(kind, t.pole(), kappa.unwrap_or(0.0), t.shape().n_r)?;
        let (d_inv, d_star) = pseudo_inverse(&d_matrix(&score, t.grid()))?;
        let deltas = deltas(&score_values(t, &score), &self.sizes)?;
        let q = quadratic_form(&deltas, &d_inv);
        let df = (self.sizes.len() - 1) * d_star;
        let (critical_value, p_value, reject) = decide(q, df, alpha)?;
        Ok(ManovaReport {
            test: kind.name().into(),
            q,
            df,
            d_star,
            critical_value,
            p_value,
            alpha,
            reject,
            group_sizes: self.sizes.clone(),
            deltas,
            kappa_hat: kappa,
            grid: Some(t.shape()),
        })
    }
}

/// Rank-score MANOVA test `Q_J` on the pooled transport.
pub fn q_statistic(
    pooled: &PooledSample,
    score: ScoreKind,
    shape: GridShape,
    seed: u64,
    alpha: f64,
) -> Result<ManovaReport> {
    check_alpha(alpha)?;
    shape.check_size(pooled.len())?;
    PooledFit::new(pooled, shape, seed)?.test(score, alpha)
}

/// Pseudo-vMF MANOVA test of equal location, centred at the pooled Fréchet mean.
pub fn pvmf_test(pooled: &PooledSample, alpha: f64) -> Result<ManovaReport> {
    check_alpha(alpha)?;
    let theta = frechet_mean(&pooled.pooled())?;
    pvmf_test_with_center(pooled, &theta, alpha)
}

pub fn pvmf_test_with_center(pooled: &PooledSample, theta: &UnitVector, alpha: f64) -> Result<ManovaReport> {
    check_alpha(alpha)?;
    let d = pooled.dim();
    let n = pooled.len() as f64;
    let th = theta.as_slice();
    let mut proj_means = Vec::new();
    let mut b = Vec::new();
    let mut dd = Vec::new();
    for (gi, g) in pooled.groups().iter().enumerate() {
        let ni = g.len() as f64;
        let mut mean = vec![0.0; d];
        let (mut e, mut sq) = (0.0, 0.0);
        for x in g {
            let c = dot(x.as_slice(), th);
            e += c;
            sq += c * c;
            for (m, v) in mean.iter_mut().zip(x.as_slice()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= ni);
        e /= ni;
        let bi = 1.0 - sq / ni;
        if bi <= 1e-12 {
            return Err(Error::DegenerateConcentration(format!(
                "group {} lies on the axis of the pooled mean (B = {bi:e})",
                gi + 1
            )));
        }
        // (I - θθ') X̄_i
        let c = dot(&mean, th);
        proj_means.push(mean.iter().zip(th).map(|(m, t)| m - c * t).collect::<Vec<f64>>());
        b.push(bi);
        dd.push(e / bi);
    }
    let sizes = pooled.sizes();
    let h: f64 = sizes.iter().zip(&dd).zip(&b).map(|((&ni, di), bi)| ni as f64 / n * di * di * bi).sum();
    let mut first = 0.0;
    for (i, pm) in proj_means.iter().enumerate() {
        first += sizes[i] as f64 / b[i] * dot(pm, pm);
    }
    let mut second = 0.0;
    for i in 0..sizes.len() {
        for j in 0..sizes.len() {
            second += sizes[i] as f64 * sizes[j] as f64 / n * dd[i] * dd[j] / h * dot(&proj_means[i], &proj_means[j]);
        }
    }
    let q = (d as f64 - 1.0) * (first - second);
    let df = (sizes.len() - 1) * (d - 1);
    let (critical_value, p_value, reject) = decide(q, df, alpha)?;
    Ok(ManovaReport {
        test: "pvmf".into(),
        q,
        df,
        d_star: d - 1,
        critical_value,
        p_value,
        alpha,
        reject,
        group_sizes: sizes,
        deltas: Vec::new(),
        kappa_hat: None,
        grid: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::structured_grid;
    use crate::models::{q_star, Family};
    use crate::rng::stream;

    #[test]
    fn score_kind_names_round_trip() {
        for k in ScoreKind::ALL {
            assert_eq!(k.name().parse::<ScoreKind>().unwrap(), k);
        }
        assert_eq!("vmf_location".parse::<ScoreKind>().unwrap(), ScoreKind::VmfLocation);
        assert!("bogus".parse::<ScoreKind>().is_err());
    }

    #[test]
    fn pseudo_inverse_examples() {
        let (inv, r) = pseudo_inverse(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(r, 3);
        assert!((inv - DMatrix::identity(3, 3)).amax() < 1e-14);
        let (inv, r) = pseudo_inverse(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).unwrap();
        assert_eq!(r, 1);
        assert!((inv[(0, 0)] - 1.0).abs() < 1e-14 && inv[(1, 1)].abs() < 1e-14);
        let ns = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(pseudo_inverse(&ns).is_err());
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 0.3, 0.7, 1.1]);
        let m = &a * a.transpose();
        let (p, r) = pseudo_inverse(&m).unwrap();
        assert_eq!(r, 2);
        assert!((&m * &p * &m - &m).amax() < 1e-8);
    }

    #[test]
    fn uniform_score_d_matrix_is_isotropic() {
        let pole = UnitVector::basis(3, 2);
        let grid = structured_grid(&pole, GridShape::new(4, 5, 1).unwrap()).unwrap();
        let s = ScoreFunction::new(ScoreKind::Uniform, &pole, 0.0, 4).unwrap();
        let d = d_matrix(&s, &grid);
        assert!((d - DMatrix::identity(3, 3) / 3.0).amax() < 1e-15);
    }

    #[test]
    fn concentration_score_at_zero_kappa() {
        let pole = UnitVector::basis(3, 2);
        let s = ScoreFunction::new(ScoreKind::VmfConcentration, &pole, 0.0, 100).unwrap();
        for r in 1..=100 {
            let expect = q_star(1.0 - r as f64 / 101.0, 3).unwrap();
            assert!((s.level(r).unwrap() - expect).abs() < 1e-12);
        }
        let grid = structured_grid(&pole, GridShape::new(100, 3, 0).unwrap()).unwrap();
        let d = d_matrix(&s, &grid);
        assert!((d[(0, 0)] - 1.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn location_concentration_score_reduces_on_the_equator() {
        let pole = UnitVector::basis(3, 2);
        let s = ScoreFunction::new(ScoreKind::VmfLocationConcentration, &pole, 2.0, 9).unwrap();
        let sign = [1.0, 0.0, 0.0];
        // find the level closest to zero and check the algebra there
        let g = s.level(5).unwrap();
        let v = s.evaluate(&[0.0; 3], 5, &sign);
        assert!((v[0] - 2.0 * (1.0 - g * g).sqrt()).abs() < 1e-14);
        assert!((v[2] - 2.0 * g).abs() < 1e-14);
    }

    #[test]
    fn constant_scores_give_zero_delta() {
        let scores = vec![vec![0.7, -1.2]; 9];
        let d = deltas(&scores, &[4, 5]).unwrap();
        assert!(d.iter().flatten().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn uniform_score_df_is_three() {
        let mut rng = stream(1, "t", 0);
        let u = Family::Uniform { d: 3 };
        let pooled = PooledSample::new(vec![u.sample(30, &mut rng).unwrap(), u.sample(34, &mut rng).unwrap()]).unwrap();
        let r = q_statistic(&pooled, ScoreKind::Uniform, GridShape::new(8, 8, 0).unwrap(), 0, 0.05).unwrap();
        assert_eq!(r.df, 3);
        assert_eq!(r.d_star, 3);
        assert!(r.q >= 0.0 && (0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn pvmf_df_and_validation() {
        let mut rng = stream(2, "t", 0);
        let f = Family::vmf(UnitVector::basis(3, 0), 3.0).unwrap();
        let pooled = PooledSample::new(vec![f.sample(50, &mut rng).unwrap(), f.sample(60, &mut rng).unwrap()]).unwrap();
        let r = pvmf_test(&pooled, 0.05).unwrap();
        assert_eq!(r.df, 2);
        assert!(r.q >= -1e-9);
        assert!(PooledSample::new(vec![vec![UnitVector::basis(3, 0)]; 2]).is_err());
        let same = vec![UnitVector::basis(3, 0); 3];
        let degenerate = PooledSample::new(vec![same.clone(), same]).unwrap();
        assert!(matches!(pvmf_test(&degenerate, 0.05), Err(Error::DegenerateConcentration(_))));
    }
}
