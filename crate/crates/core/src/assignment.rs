//! Dense linear assignment: shortest augmenting paths with dual potentials.

use crate::error::{invalid, Error, Result};
use crate::geometry::{cost, UnitVector};

/// Square cost matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("cost matrix must be at least 1x1"));
        }
        if entries.len() != n * n {
            return Err(Error::SizeMismatch(format!(
                "expected {} entries for a {n}x{n} matrix, found {}",
                n * n,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|c| !c.is_finite()) {
            return Err(invalid(format!("non-finite cost at ({}, {})", pos / n, pos % n)));
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::SizeMismatch("cost matrix is not square".into()));
        }
        Self::new(n, rows.concat())
    }

    /// Transport costs `d(y, z)^2 / 2` between samples (rows) and targets (columns).
    pub fn transport(sample: &[UnitVector], targets: &[UnitVector]) -> Result<Self> {
        if sample.len() != targets.len() {
            return Err(Error::SizeMismatch(format!(
                "{} sample points but {} grid points",
                sample.len(),
                targets.len()
            )));
        }
        let n = sample.len();
        let d = sample.first().map(UnitVector::dim).unwrap_or(0);
        for p in sample.iter().chain(targets) {
            if p.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.dim() });
            }
        }
        let mut entries = Vec::with_capacity(n * n);
        for y in sample {
            for z in targets {
                entries.push(cost(y.as_slice(), z.as_slice()));
            }
        }
        Self::new(n, entries)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Sum of `cost[i][perm[i]]`.
    pub fn total(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `perm[i]` is the column matched to row `i`.
    pub perm: Vec<usize>,
    pub total_cost: f64,
}

/// Exact minimum-cost perfect matching.
///
/// Rows are inserted one at a time and each is routed along a shortest
/// augmenting path in the reduced costs (Dijkstra over the columns not yet
/// reached, dual potentials updated once per augmentation). Among columns
/// at equal distance the first in index order wins, except that a free
/// column is preferred over an assigned one; the all-zero matrix therefore
/// yields the identity.
pub fn solve(cost: &CostMatrix) -> Assignment {
    let n = cost.n;
    let a = &cost.entries;
    const NONE: usize = usize::MAX;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut row4col = vec![NONE; n];
    let mut col4row = vec![NONE; n];
    let mut path = vec![NONE; n];
    let mut shortest = vec![f64::INFINITY; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);
    let mut visited_rows: Vec<usize> = Vec::with_capacity(n);
    let mut visited_cols: Vec<usize> = Vec::with_capacity(n);

    for cur in 0..n {
        remaining.clear();
        remaining.extend(0..n);
        visited_rows.clear();
        visited_cols.clear();
        shortest.iter_mut().for_each(|s| *s = f64::INFINITY);

        let mut min_val = 0.0;
        let mut i = cur;
        let sink = loop {
            visited_rows.push(i);
            let row = &a[i * n..(i + 1) * n];
            let base = min_val - u[i];
            let mut best_pos = 0;
            let mut lowest = f64::INFINITY;
            let mut best_free = false;
            for (pos, &j) in remaining.iter().enumerate() {
                let r = base + row[j] - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                let s = shortest[j];
                if s < lowest || (s == lowest && !best_free && row4col[j] == NONE) {
                    lowest = s;
                    best_pos = pos;
                    best_free = row4col[j] == NONE;
                }
            }
            min_val = lowest;
            // order-preserving removal keeps the tie rule index-based
            let j = remaining.remove(best_pos);
            visited_cols.push(j);
            if row4col[j] == NONE {
                break j;
            }
            i = row4col[j];
        };

        u[cur] += min_val;
        for &r in &visited_rows[1..] {
            u[r] += min_val - shortest[col4row[r]];
        }
        for &c in &visited_cols {
            v[c] -= min_val - shortest[c];
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            std::mem::swap(&mut col4row[r], &mut j);
            if r == cur {
                break;
            }
        }
    }

    let total_cost = cost.total(&col4row);
    Assignment { perm: col4row, total_cost }
}

pub const BRUTE_FORCE_MAX: usize = 9;

/// Exhaustive search over all `n!` permutations in lexicographic order;
/// the first minimum wins.
pub fn brute_force(cost: &CostMatrix) -> Result<Assignment> {
    let n = cost.n;
    if n > BRUTE_FORCE_MAX {
        return Err(invalid(format!("brute force limited to n <= {BRUTE_FORCE_MAX}, got {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = cost.total(&perm);
    while next_permutation(&mut perm) {
        let c = cost.total(&perm);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    Ok(Assignment { perm: best, total_cost: best_cost })
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    for &j in perm {
        if j >= perm.len() || seen[j] {
            return false;
        }
        seen[j] = true;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_matrix(n: usize, seed: u64) -> CostMatrix {
        let mut rng = crate::rng::stream(seed, "lap-test", n as u64);
        CostMatrix::new(n, (0..n * n).map(|_| rng.random::<f64>() * 5.0).collect()).unwrap()
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let c = CostMatrix::new(3, vec![0.0; 9]).unwrap();
        let a = solve(&c);
        assert_eq!(a.perm, vec![0, 1, 2]);
        assert_eq!(a.total_cost, 0.0);
    }

    #[test]
    fn rank_one_matrix_matches_exhaustive_search() {
        let c = CostMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0], vec![3.0, 6.0, 9.0]]).unwrap();
        // rearrangement inequality: pair large with small
        let bf = brute_force(&c).unwrap();
        assert_eq!(bf.perm, vec![2, 1, 0]);
        assert_eq!(bf.total_cost, 10.0);
        assert_eq!(solve(&c).total_cost, 10.0);
    }

    #[test]
    fn brute_force_small_cases() {
        let one = CostMatrix::new(1, vec![0.3]).unwrap();
        assert_eq!(brute_force(&one).unwrap(), Assignment { perm: vec![0], total_cost: 0.3 });
        let two = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(brute_force(&two).unwrap().perm, vec![0, 1]);
        assert!(brute_force(&random_matrix(10, 0)).is_err());
    }

    #[test]
    fn solver_is_optimal_on_random_8x8() {
        for seed in 0..100 {
            let c = random_matrix(8, seed);
            let a = solve(&c);
            assert!(is_permutation(&a.perm));
            let bf = brute_force(&c).unwrap();
            assert!((a.total_cost - bf.total_cost).abs() <= 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn solver_matches_on_7x7() {
        for seed in 0..20 {
            let c = random_matrix(7, 1000 + seed);
            assert!((solve(&c).total_cost - brute_force(&c).unwrap().total_cost).abs() <= 1e-9);
        }
    }

    #[test]
    fn row_shift_moves_cost_not_permutation() {
        for seed in 0..30 {
            let c = random_matrix(6, 77 + seed);
            let base = solve(&c);
            let mut shifted = c.entries.clone();
            for e in &mut shifted[2 * 6..3 * 6] {
                *e += 1.75;
            }
            let s = solve(&CostMatrix::new(6, shifted).unwrap());
            assert_eq!(s.perm, base.perm);
            assert!((s.total_cost - base.total_cost - 1.75).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CostMatrix::new(2, vec![0.0; 3]).is_err());
        assert!(CostMatrix::new(2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0]]).is_err());
        assert!(CostMatrix::new(0, vec![]).is_err());
    }
}
