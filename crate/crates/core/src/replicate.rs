//! Replication of the simulation tables and power curves.
//!
//! Replication `r` of a data-generating row draws from its own named stream,
//! so the rates do not depend on how rayon schedules the work.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{rotation_z_flat, UnitVector};
use crate::gof::{rayleigh_test, NullCalibration, NullModel};
use crate::grids::GridShape;
use crate::manova::{pvmf_test, PooledFit, PooledSample, ScoreKind};
use crate::models::{Family, MixtureParams, SineSkewParams, TangentVmfParams};
use crate::rng::{derive_seed, stream};

pub const DESK_REPS: usize = 200;
pub const PAPER_REPS: usize = 1000;
pub const PAPER_MANOVA_REPS: usize = 500;
pub const GOF_MC: usize = 2000;
pub const ALPHA: f64 = 0.05;

pub const MANOVA_SIZES: (usize, usize) = (500, 600);
pub const MANOVA_SHAPE: (usize, usize, usize) = (44, 25, 0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            _ => Err(invalid(format!("unknown scale '{s}' (expected desk or paper)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fig3Case {
    Location,
    Concentration,
    Multimodal,
    Skewed,
}

impl Fig3Case {
    pub fn number(self) -> usize {
        match self {
            Self::Location => 1,
            Self::Concentration => 2,
            Self::Multimodal => 3,
            Self::Skewed => 4,
        }
    }

    pub fn xis(self) -> Vec<f64> {
        match self {
            Self::Location => vec![0.0, 0.2, 0.4, 0.6, 0.8],
            Self::Concentration => vec![0.0, 0.5, 1.0, 1.5, 2.0],
            Self::Multimodal => vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            Self::Skewed => vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }

    /// The two group distributions at effect size `xi`.
    pub fn groups(self, xi: f64) -> Result<(Family, Family)> {
        let e1 = UnitVector::basis(3, 0);
        let o_xi = rotation_z_flat(xi);
        match self {
            Self::Location => Ok((Family::vmf(e1.clone(), 3.0)?, Family::vmf(e1.rotate(&o_xi)?, 3.0)?)),
            Self::Concentration => Ok((Family::vmf(e1.clone(), 3.0)?, Family::vmf(e1, 3.0 + xi)?)),
            Self::Multimodal => {
                let mix = Family::Mixture(MixtureParams::new(vec![
                    (0.375, Family::vmf(e1, 3.0)?),
                    (0.375, Family::vmf(UnitVector::new(vec![-0.8, 0.3, 0.27f64.sqrt()])?, 2.0)?),
                    (0.25, Family::vmf(UnitVector::new(vec![0.0, -0.7, 0.51f64.sqrt()])?, 3.0)?),
                ])?);
                Ok((mix.clone(), Family::rotated(o_xi, mix)?))
            }
            Self::Skewed => {
                let tangent = |b: f64| -> Result<Family> {
                    Ok(Family::TangentVmf(TangentVmfParams::new(
                        UnitVector::basis(3, 2),
                        UnitVector::new(vec![0.7, 0.51f64.sqrt()])?,
                        1.0,
                        2.0,
                        b,
                    )?))
                };
                Ok((tangent(5.0)?, tangent(5.0 + xi)?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Table1,
    Table2,
    Fig3(Fig3Case),
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "table1" => Self::Table1,
            "table2" => Self::Table2,
            "fig3-case1" => Self::Fig3(Fig3Case::Location),
            "fig3-case2" => Self::Fig3(Fig3Case::Concentration),
            "fig3-case3" => Self::Fig3(Fig3Case::Multimodal),
            "fig3-case4" => Self::Fig3(Fig3Case::Skewed),
            _ => return Err(invalid(format!("unknown target '{s}' (expected table1, table2 or fig3-case1..4)"))),
        })
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Table1 => f.write_str("table1"),
            Self::Table2 => f.write_str("table2"),
            Self::Fig3(c) => write!(f, "fig3-case{}", c.number()),
        }
    }
}

impl Target {
    pub fn reps(self, scale: Scale) -> usize {
        match (self, scale) {
            (_, Scale::Desk) => DESK_REPS,
            (Self::Fig3(_), Scale::Paper) => PAPER_MANOVA_REPS,
            (_, Scale::Paper) => PAPER_REPS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DgpRow {
    pub label: String,
    pub family: Family,
}

fn row(label: impl Into<String>, family: Family) -> DgpRow {
    DgpRow { label: label.into(), family }
}

fn mixture(parts: Vec<(f64, Family)>) -> Result<Family> {
    Ok(Family::Mixture(MixtureParams::new(parts)?))
}

/// Uniformity alternatives on `S^2`, `n = 400`.
pub fn table1_rows() -> Result<Vec<DgpRow>> {
    let pole = UnitVector::basis(3, 2);
    let mu = UnitVector::new(vec![0.0, 1.0])?;
    let t1 = UnitVector::new(vec![0.0, -0.3, 0.91f64.sqrt()])?;
    let t2 = UnitVector::new(vec![0.3, 0.66f64.sqrt(), 0.5])?;
    // uniform latitude on S^2: (V + 1)/2 ~ Beta(1, 1)
    let tangent = |k: f64| -> Result<Family> {
        Ok(Family::TangentVmf(TangentVmfParams::new(pole.clone(), mu.clone(), k, 1.0, 1.0)?))
    };
    let mut rows = vec![row("uniform", Family::Uniform { d: 3 })];
    for k in [0.05, 0.1, 0.5] {
        rows.push(row(format!("vmf k={k}"), Family::vmf(pole.clone(), k)?));
    }
    for k in [0.05, 0.1, 0.2] {
        rows.push(row(format!("tangent-vmf k={k}"), tangent(k)?));
    }
    for k in [0.1, 0.2, 0.3] {
        let fam = mixture(vec![(0.5, Family::vmf(t1.clone(), k)?), (0.5, Family::vmf(t2.clone(), k)?)])?;
        rows.push(row(format!("mix2-vmf k={k}"), fam));
    }
    for k in [0.07, 0.1, 0.2] {
        let fam = mixture(vec![
            (0.5, tangent(k)?),
            (0.25, Family::vmf(t1.clone(), k)?),
            (0.25, Family::vmf(t2.clone(), k)?),
        ])?;
        rows.push(row(format!("mix2-vmf+tangent k={k}"), fam));
    }
    Ok(rows)
}

/// Uniformity alternatives on `S^1`, `n = 100`.
pub fn table2_rows() -> Result<Vec<DgpRow>> {
    let pole = UnitVector::new(vec![0.0, 1.0])?;
    let t1 = UnitVector::new(vec![-0.3, 0.91f64.sqrt()])?;
    let t2 = UnitVector::new(vec![0.6, 0.8])?;
    let mut rows = vec![row("uniform", Family::Uniform { d: 2 })];
    for k in [0.05, 0.1, 0.5] {
        rows.push(row(format!("vmf k={k}"), Family::vmf(pole.clone(), k)?));
    }
    for k in [0.1, 0.25, 0.5] {
        let fam = mixture(vec![(0.7, Family::vmf(t1.clone(), k)?), (0.3, Family::vmf(t2.clone(), k)?)])?;
        rows.push(row(format!("mix2-vmf k={k}"), fam));
    }
    for l in [0.1, 0.3, 0.35] {
        rows.push(row(format!("sine-skew l={l}"), Family::SineSkew(SineSkewParams::new(0.0, l, 0.1)?)));
    }
    Ok(rows)
}

/// One CSV row of a uniformity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dgp: String,
    pub test: String,
    pub rejection_rate: f64,
    pub n_reps: usize,
    pub seed: u64,
}

/// One CSV row of a power curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub xi: f64,
    pub score: String,
    pub rejection_rate: f64,
    pub n_reps: usize,
    pub seed: u64,
}

/// Uniformity rejection rates of the CvM (`.0`) and Rayleigh (`.1`) tests
/// over `reps` samples of size `calibration.n` drawn from `family`.
pub fn uniformity_rates(
    family: &Family,
    label: &str,
    reps: usize,
    calibration: &NullCalibration,
    alpha: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let null = NullModel::Uniform { d: calibration.d };
    let crit = calibration.critical_value(alpha)?;
    let outcomes = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, label, r as u64);
            let sample = family.sample(calibration.n, &mut rng)?;
            let t = crate::gof::cvm_statistic(&sample, |z| null.transport(z), calibration.shape, calibration.seed)?;
            Ok((t > crit, rayleigh_test(&sample, alpha)?.reject))
        })
        .collect::<Result<Vec<(bool, bool)>>>()?;
    Ok(rate_pair(&outcomes))
}

fn rate_pair(outcomes: &[(bool, bool)]) -> (f64, f64) {
    let n = outcomes.len() as f64;
    let a = outcomes.iter().filter(|o| o.0).count() as f64;
    let b = outcomes.iter().filter(|o| o.1).count() as f64;
    (a / n, b / n)
}

/// Uniformity table over `rows`, one calibration shared by every row.
pub fn uniformity_table(
    rows: &[DgpRow],
    n: usize,
    reps: usize,
    n_mc: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<TableRow>> {
    let d = rows.first().ok_or_else(|| invalid("no rows"))?.family.dim();
    let shape = GridShape::auto(n, d)?;
    let calibration = NullCalibration::build(&NullModel::Uniform { d }, n, shape, n_mc, seed)?;
    let mut out = Vec::with_capacity(2 * rows.len());
    for r in rows {
        let (ot, ray) = uniformity_rates(&r.family, &r.label, reps, &calibration, alpha, seed)?;
        for (test, rate) in [("ot", ot), ("rayleigh", ray)] {
            out.push(TableRow { dgp: r.label.clone(), test: test.into(), rejection_rate: rate, n_reps: reps, seed });
        }
    }
    Ok(out)
}

/// Decision of every test on one replication, scores in `ScoreKind::ALL`
/// order followed by pvMF.
pub fn manova_decisions(pooled: &PooledSample, shape: GridShape, alpha: f64, fit_seed: u64) -> Result<[bool; 5]> {
    let mut fit = PooledFit::new(pooled, shape, fit_seed)?;
    let mut out = [false; 5];
    for (slot, kind) in out.iter_mut().zip(ScoreKind::ALL) {
        *slot = fit.test(kind, alpha)?.reject;
    }
    out[4] = pvmf_test(pooled, alpha)?.reject;
    Ok(out)
}

/// Rejection rates of the four rank tests and pvMF at one effect size.
pub fn manova_power(
    case: Fig3Case,
    xi: f64,
    sizes: (usize, usize),
    shape: GridShape,
    reps: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<PowerRow>> {
    let (f1, f2) = case.groups(xi)?;
    let label = format!("fig3-case{}:{xi}", case.number());
    let decisions = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, &label, r as u64);
            let g1 = f1.sample(sizes.0, &mut rng)?;
            let g2 = f2.sample(sizes.1, &mut rng)?;
            let pooled = PooledSample::new(vec![g1, g2])?;
            manova_decisions(&pooled, shape, alpha, derive_seed(seed, "manova-fit", r as u64))
        })
        .collect::<Result<Vec<[bool; 5]>>>()?;
    let names = ScoreKind::ALL.iter().map(|k| k.name()).chain(["pvmf"]);
    Ok(names
        .enumerate()
        .map(|(t, name)| PowerRow {
            xi,
            score: name.into(),
            rejection_rate: decisions.iter().filter(|d| d[t]).count() as f64 / reps as f64,
            n_reps: reps,
            seed,
        })
        .collect())
}

pub enum Rows {
    Table(Vec<TableRow>),
    Power(Vec<PowerRow>),
}

/// Runs a full replication target.
pub fn run(target: Target, scale: Scale, seed: u64) -> Result<Rows> {
    let reps = target.reps(scale);
    match target {
        Target::Table1 => Ok(Rows::Table(uniformity_table(&table1_rows()?, 400, reps, GOF_MC, ALPHA, seed)?)),
        Target::Table2 => Ok(Rows::Table(uniformity_table(&table2_rows()?, 100, reps, GOF_MC, ALPHA, seed)?)),
        Target::Fig3(case) => {
            let (a, b, c) = MANOVA_SHAPE;
            let shape = GridShape::new(a, b, c)?;
            let mut rows = Vec::new();
            for xi in case.xis() {
                rows.extend(manova_power(case, xi, MANOVA_SIZES, shape, reps, ALPHA, seed)?);
            }
            Ok(Rows::Power(rows))
        }
    }
}
