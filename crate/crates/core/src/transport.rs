//! Empirical directional distribution function: optimal coupling of a
//! sample with a grid, ranks, signs, contours and meridians.

use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix};
use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, UnitVector};
use crate::grids::{plain_grid, structured_grid, GridShape, PlainGrid, StructuredGrid};
use crate::models::frechet_mean;

fn check_sample(sample: &[UnitVector]) -> Result<usize> {
    let first = sample.first().ok_or_else(|| invalid("empty sample"))?;
    let d = first.dim();
    if let Some(p) = sample.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlainFit {
    pub images: Vec<UnitVector>,
    pub perm: Vec<usize>,
    pub total_cost: f64,
}

/// Optimal coupling of `sample` with an unstructured grid of equal size.
pub fn fit_plain(sample: &[UnitVector], grid: &PlainGrid) -> Result<PlainFit> {
    check_sample(sample)?;
    let a = solve(&CostMatrix::transport(sample, &grid.points)?);
    let images = a.perm.iter().map(|&j| grid.points[j].clone()).collect();
    Ok(PlainFit { images, perm: a.perm, total_cost: a.total_cost })
}

/// First step of the two-step construction: the image, under the coupling
/// with a plain grid, of the sample point closest to the Fréchet mean.
pub fn estimate_pole(sample: &[UnitVector], seed: u64) -> Result<UnitVector> {
    let d = check_sample(sample)?;
    let center = frechet_mean(sample)?;
    let fit = fit_plain(sample, &plain_grid(sample.len(), d, seed)?)?;
    let mut best = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for (i, p) in sample.iter().enumerate() {
        let c = p.dot(&center);
        if c > best_dot {
            best_dot = c;
            best = i;
        }
    }
    Ok(fit.images[best].clone())
}

/// Fitted empirical transport on a structured grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "TransportRecord", try_from = "TransportRecord")]
pub struct EmpiricalTransport {
    sample: Vec<UnitVector>,
    perm: Vec<usize>,
    grid: StructuredGrid,
    total_cost: f64,
}

/// Serialized form; the grid itself is rebuilt from the pole and shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TransportRecord {
    sample: Vec<UnitVector>,
    images: Vec<UnitVector>,
    perm: Vec<usize>,
    ranks: Vec<usize>,
    meridians: Vec<Option<usize>>,
    signs: Vec<Vec<f64>>,
    pole: UnitVector,
    n_r: usize,
    n_s: usize,
    n_0: usize,
    total_cost: f64,
}

impl From<EmpiricalTransport> for TransportRecord {
    fn from(t: EmpiricalTransport) -> Self {
        let shape = t.shape();
        Self {
            images: t.images(),
            ranks: t.ranks(),
            meridians: t.meridians(),
            signs: t.signs(),
            pole: t.pole().clone(),
            n_r: shape.n_r,
            n_s: shape.n_s,
            n_0: shape.n_0,
            total_cost: t.total_cost,
            perm: t.perm,
            sample: t.sample,
        }
    }
}

impl TryFrom<TransportRecord> for EmpiricalTransport {
    type Error = Error;

    fn try_from(r: TransportRecord) -> Result<Self> {
        let shape = GridShape::new(r.n_r, r.n_s, r.n_0)?;
        shape.check_size(r.sample.len())?;
        if r.perm.len() != r.sample.len() || !crate::assignment::is_permutation(&r.perm) {
            return Err(Error::Parse("perm is not a permutation of the sample indices".into()));
        }
        let grid = structured_grid(&r.pole, shape)?;
        Ok(Self { sample: r.sample, perm: r.perm, grid, total_cost: r.total_cost })
    }
}

/// Two-step fit: pole estimation, then coupling with the structured grid.
pub fn fit(sample: &[UnitVector], shape: GridShape, seed: u64) -> Result<EmpiricalTransport> {
    check_sample(sample)?;
    shape.check_size(sample.len())?;
    let pole = estimate_pole(sample, seed)?;
    fit_with_pole(sample, &pole, shape)
}

/// Couples `sample` with the structured grid around a given pole.
pub fn fit_with_pole(sample: &[UnitVector], pole: &UnitVector, shape: GridShape) -> Result<EmpiricalTransport> {
    let d = check_sample(sample)?;
    if pole.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: pole.dim() });
    }
    shape.check_size(sample.len())?;
    let grid = structured_grid(pole, shape)?;
    let a = solve(&CostMatrix::transport(sample, grid.points())?);
    Ok(EmpiricalTransport { sample: sample.to_vec(), perm: a.perm, grid, total_cost: a.total_cost })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianEstimate {
    pub point: UnitVector,
    pub index: usize,
    pub score: f64,
    /// Always true: the estimator is a plug-in surrogate, not a consistent
    /// estimate of the transport median.
    pub heuristic: bool,
}

impl EmpiricalTransport {
    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn sample(&self) -> &[UnitVector] {
        &self.sample
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn shape(&self) -> GridShape {
        self.grid.shape()
    }

    pub fn pole(&self) -> &UnitVector {
        self.grid.pole()
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    /// Grid index assigned to each observation.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn image(&self, i: usize) -> &UnitVector {
        &self.grid.points()[self.perm[i]]
    }

    pub fn images(&self) -> Vec<UnitVector> {
        (0..self.len()).map(|i| self.image(i).clone()).collect()
    }

    pub fn rank(&self, i: usize) -> usize {
        self.grid.rank_of(self.perm[i])
    }

    pub fn ranks(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.rank(i)).collect()
    }

    pub fn meridian_index(&self, i: usize) -> Option<usize> {
        self.grid.meridian_of(self.perm[i])
    }

    pub fn meridians(&self) -> Vec<Option<usize>> {
        (0..self.len()).map(|i| self.meridian_index(i)).collect()
    }

    pub fn sign(&self, i: usize) -> Vec<f64> {
        self.grid.sign_of(self.perm[i])
    }

    pub fn signs(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.sign(i)).collect()
    }

    fn check_rank(&self, j: usize) -> Result<()> {
        let n_r = self.shape().n_r;
        if j == 0 || j > n_r {
            return Err(invalid(format!("rank {j} outside 1..={n_r}")));
        }
        Ok(())
    }

    /// Indices of observations with rank exactly `j`.
    pub fn contour_indices(&self, j: usize) -> Result<Vec<usize>> {
        self.check_rank(j)?;
        Ok((0..self.len()).filter(|&i| self.rank(i) == j).collect())
    }

    /// Empirical quantile contour of order `j / (n_R + 1)`.
    pub fn contour(&self, j: usize) -> Result<Vec<UnitVector>> {
        Ok(self.contour_indices(j)?.into_iter().map(|i| self.sample[i].clone()).collect())
    }

    /// Empirical quantile region: observations with rank at most `j`.
    pub fn region(&self, j: usize) -> Result<Vec<UnitVector>> {
        self.check_rank(j)?;
        Ok((0..self.len()).filter(|&i| self.rank(i) <= j).map(|i| self.sample[i].clone()).collect())
    }

    pub fn meridian_indices(&self, j_s: usize) -> Result<Vec<usize>> {
        let n_s = self.shape().n_s;
        if j_s >= n_s {
            return Err(invalid(format!("meridian index {j_s} outside 0..{n_s}")));
        }
        Ok((0..self.len()).filter(|&i| self.meridian_index(i) == Some(j_s)).collect())
    }

    /// Observations whose image lies on meridian `j_s`.
    pub fn meridian(&self, j_s: usize) -> Result<Vec<UnitVector>> {
        Ok(self.meridian_indices(j_s)?.into_iter().map(|i| self.sample[i].clone()).collect())
    }

    /// Plug-in surrogate for the transport median: the observation `z`
    /// maximizing the share of observations that lie in the hemisphere
    /// around `z` and whose images lie in the hemisphere around the image
    /// of `z`. First index wins ties.
    pub fn transport_median(&self) -> MedianEstimate {
        let n = self.len();
        let images: Vec<&[f64]> = (0..n).map(|i| self.image(i).as_slice()).collect();
        let mut best = (0usize, -1.0f64);
        for i in 0..n {
            let zi = self.sample[i].as_slice();
            let count = (0..n)
                .filter(|&k| dot(images[k], images[i]) >= 0.0 && dot(self.sample[k].as_slice(), zi) >= 0.0)
                .count();
            let score = count as f64 / n as f64;
            if score > best.1 {
                best = (i, score);
            }
        }
        MedianEstimate { point: self.sample[best.0].clone(), index: best.0, score: best.1, heuristic: true }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::brute_force;
    use crate::geometry::{decompose, rotation_z_flat};
    use crate::models::{sample_uniform, Family};
    use crate::rng::stream;

    #[test]
    fn sample_equal_to_plain_grid_costs_nothing() {
        let grid = plain_grid(30, 3, 0).unwrap();
        let mut sample = grid.points.clone();
        sample.reverse();
        let f = fit_plain(&sample, &grid).unwrap();
        assert_eq!(f.total_cost, 0.0);
        assert!(f.images.iter().zip(&sample).all(|(a, b)| a == b));
    }

    #[test]
    fn plain_fit_is_optimal_and_rotation_invariant() {
        let mut rng = stream(1, "t", 0);
        for _ in 0..10 {
            let sample = sample_uniform(6, 3, &mut rng).unwrap();
            let grid = PlainGrid { points: sample_uniform(6, 3, &mut rng).unwrap(), seed: 0 };
            let f = fit_plain(&sample, &grid).unwrap();
            let bf = brute_force(&CostMatrix::transport(&sample, &grid.points).unwrap()).unwrap();
            assert!((f.total_cost - bf.total_cost).abs() < 1e-9);
            let o = rotation_z_flat(3.3);
            let rs: Vec<_> = sample.iter().map(|p| p.rotate(&o).unwrap()).collect();
            let rg = PlainGrid { points: grid.points.iter().map(|p| p.rotate(&o).unwrap()).collect(), seed: 0 };
            assert!((fit_plain(&rs, &rg).unwrap().total_cost - f.total_cost).abs() < 1e-9);
        }
        assert!(fit_plain(&[UnitVector::basis(3, 0)], &plain_grid(2, 3, 0).unwrap()).is_err());
    }

    #[test]
    fn pole_of_a_repeated_point() {
        let p = UnitVector::basis(3, 1);
        let sample = vec![p.clone(); 5];
        let pole = estimate_pole(&sample, 0).unwrap();
        // every image is a grid point; with all sample points equal the
        // chosen image is the one paired with index 0
        assert!((crate::geometry::norm(pole.as_slice()) - 1.0).abs() < 1e-12);
        let t = fit_with_pole(&sample, &p, GridShape::new(2, 2, 1).unwrap()).unwrap();
        assert_eq!(t.pole(), &p);
    }

    #[test]
    fn five_point_ranks() {
        let mut rng = stream(2, "t", 0);
        let sample = sample_uniform(5, 3, &mut rng).unwrap();
        let t = fit(&sample, GridShape::new(2, 2, 1).unwrap(), 0).unwrap();
        let mut r = t.ranks();
        r.sort();
        assert_eq!(r, vec![0, 1, 1, 2, 2]);
        assert!(fit(&sample, GridShape::new(2, 2, 0).unwrap(), 0).is_err());
    }

    #[test]
    fn ranks_signs_contours_meridians() {
        let mut rng = stream(3, "t", 0);
        let f = Family::vmf(UnitVector::basis(3, 2), 2.0).unwrap();
        let sample = f.sample(47, &mut rng).unwrap();
        let shape = GridShape::new(5, 9, 2).unwrap();
        let t = fit(&sample, shape, 4).unwrap();
        let pole = t.pole().clone();
        for i in 0..t.len() {
            let parts = decompose(t.image(i).as_slice(), pole.as_slice());
            let s = t.sign(i);
            if t.rank(i) == 0 {
                assert!(s.iter().all(|&x| x == 0.0));
            } else {
                assert!(dot(&s, pole.as_slice()).abs() < 1e-10);
                assert!(parts.sign.iter().zip(&s).all(|(a, b)| (a - b).abs() < 1e-9));
                let level = 1.0 - crate::models::f_star(parts.latitude.clamp(-1.0, 1.0), 3).unwrap();
                assert!((level - t.rank(i) as f64 / 6.0).abs() < 1e-9);
            }
        }
        assert_eq!(t.region(1).unwrap().len(), 2 + 9);
        let mut total = t.ranks().iter().filter(|&&r| r == 0).count();
        for j in 1..=5 {
            let c = t.contour(j).unwrap();
            assert_eq!(c.len(), 9);
            total += c.len();
        }
        assert_eq!(total, t.len());
        for js in 0..9 {
            let idx = t.meridian_indices(js).unwrap();
            assert_eq!(idx.len(), 5);
            let mut r: Vec<usize> = idx.iter().map(|&i| t.rank(i)).collect();
            r.sort();
            assert_eq!(r, (1..=5).collect::<Vec<_>>());
        }
        assert!(t.contour(0).is_err());
        assert!(t.contour(6).is_err());
        assert!(t.meridian(9).is_err());
    }

    #[test]
    fn json_round_trip_rebuilds_grid() {
        let mut rng = stream(5, "t", 0);
        let sample = sample_uniform(13, 3, &mut rng).unwrap();
        let t = fit(&sample, GridShape::new(3, 4, 1).unwrap(), 1).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: EmpiricalTransport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.images(), t.images());
        assert_eq!(back.ranks(), t.ranks());
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }

    #[test]
    fn median_surrogate_near_frechet_mean_for_tight_data() {
        let mut rng = stream(6, "t", 0);
        let f = Family::vmf(UnitVector::normalize(vec![1.0, 1.0, 0.0]).unwrap(), 100.0).unwrap();
        let sample = f.sample(100, &mut rng).unwrap();
        let t = fit(&sample, GridShape::auto(100, 3).unwrap(), 0).unwrap();
        let m = t.transport_median();
        assert!(m.heuristic);
        let fm = frechet_mean(&sample).unwrap();
        assert!(crate::geometry::geodesic_distance(&m.point, &fm).unwrap() < 0.2);
        assert_eq!(t.transport_median(), m);
    }
}
