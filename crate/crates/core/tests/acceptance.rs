use std::io::Write;
use std::time::{Duration, Instant};

use dirquant::assignment::{brute_force, is_permutation, solve, CostMatrix};
use dirquant::gof::NullModel;
use dirquant::gof::{cvm_from_fit, NullCalibration};
use dirquant::manova::{deltas, pseudo_inverse, quadratic_form, PooledFit, PooledSample, ScoreKind};
use dirquant::models::{f_star, kappa_from_resultant, rotsym_transport, vmf_kappa_mle, Family, LatitudeCdf};
use dirquant::replicate::{
    manova_decisions, manova_power, table1_rows, table2_rows, uniformity_rates, DgpRow, Fig3Case,
};
use dirquant::rng::{derive_seed, stream};
use dirquant::special::chi2_quantile;
use dirquant::transport::fit;
use dirquant::{GridShape, UnitVector};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;
use rayon::prelude::*;
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma_lr;

const ALPHA: f64 = 0.05;

/// Writes straight to stderr so the verdict shows even when libtest captures output.
fn verdict(k: usize, pass: bool, detail: &str) {
    let line = format!("{} criterion {k}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {k}: {detail}");
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

fn dgp<'a>(rows: &'a [DgpRow], label: &str) -> &'a Family {
    &rows.iter().find(|r| r.label == label).unwrap_or_else(|| panic!("no row {label}")).family
}

#[test]
fn criterion_1_assignment_exactness() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for r in 0..200u64 {
        let mut rng = stream(1, "acc-lap", r);
        let n = rng.random_range(2..=9usize);
        let entries = (0..n * n).map(|_| rng.random::<f64>() * 10.0).collect();
        let c = CostMatrix::new(n, entries).unwrap();
        let a = solve(&c);
        assert!(is_permutation(&a.perm));
        worst = worst.max((a.total_cost - brute_force(&c).unwrap().total_cost).abs());
    }
    let t = start.elapsed();
    verdict(
        1,
        worst <= 1e-9 && t < Duration::from_secs(10),
        &format!("max gap {worst:.1e} over 200 matrices in {t:.1?}"),
    );
}

#[test]
fn criterion_2_rank_sign_combinatorics() {
    let start = Instant::now();
    let shapes = |d: usize| -> Vec<GridShape> {
        let raw: &[(usize, usize, usize)] = match d {
            2 => &[(20, 2, 1), (37, 2, 0), (50, 2, 1)],
            3 => &[(10, 12, 1), (7, 7, 0), (15, 10, 4)],
            _ => &[(8, 9, 2), (12, 6, 0), (5, 20, 1)],
        };
        raw.iter().map(|&(r, s, z)| GridShape::new(r, s, z).unwrap()).collect()
    };
    let mut ok = true;
    let mut worst_orth = 0.0f64;
    for k in 0..50u64 {
        let (d, shape) = if k == 0 {
            (3, GridShape::new(40, 50, 1).unwrap())
        } else {
            let d = [2usize, 3, 5][k as usize % 3];
            (d, shapes(d)[(k as usize / 3) % 3])
        };
        let fam = if k % 2 == 0 { Family::Uniform { d } } else { Family::vmf(UnitVector::basis(d, 0), 4.0).unwrap() };
        let sample = fam.sample(shape.total(), &mut stream(2, "acc-ranks", k)).unwrap();
        let t = fit(&sample, shape, k).unwrap();
        ok &= is_permutation(t.perm());
        let mut counts = vec![0usize; shape.n_r + 1];
        for i in 0..t.len() {
            counts[t.rank(i)] += 1;
            let dot: f64 = t.sign(i).iter().zip(t.pole().as_slice()).map(|(a, b)| a * b).sum();
            worst_orth = worst_orth.max(dot.abs());
        }
        ok &= counts[0] == shape.n_0 && counts[1..].iter().all(|&c| c == shape.n_s);
        // the n_0 pole copies coincide; every other grid point is hit exactly once
        let mut imgs: Vec<Vec<u64>> = (0..t.len())
            .filter(|&i| t.rank(i) > 0)
            .map(|i| t.image(i).as_slice().iter().map(|x| x.to_bits()).collect())
            .collect();
        imgs.sort();
        imgs.dedup();
        ok &= imgs.len() == t.len() - shape.n_0;
    }
    let t = start.elapsed();
    verdict(
        2,
        ok && worst_orth < 1e-9 && t < Duration::from_secs(60),
        &format!("50 fits, multisets exact: {ok}, max sign residual {worst_orth:.1e}, {t:.1?}"),
    );
}

#[test]
fn criterion_3_glivenko_cantelli_trend() {
    let start = Instant::now();
    let theta = UnitVector::basis(3, 2);
    let fam = Family::vmf(theta.clone(), 10.0).unwrap();
    let cdf = LatitudeCdf::vmf(10.0, 3).unwrap();
    let sup_error = |n: usize, r: u64| -> f64 {
        let sample = fam.sample(n, &mut stream(3, &format!("acc-gc{n}"), r)).unwrap();
        let t = fit(&sample, GridShape::auto(n, 3).unwrap(), r).unwrap();
        (0..n)
            .map(|i| {
                let f = rotsym_transport(&sample[i], &theta, &cdf).unwrap();
                let e: f64 = t.image(i).as_slice().iter().zip(f.as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
                e.sqrt()
            })
            .fold(0.0, f64::max)
    };
    let m100 = median((0..20).into_par_iter().map(|r| sup_error(100, r)).collect());
    let m400 = median((0..20).into_par_iter().map(|r| sup_error(400, r)).collect());
    let t = start.elapsed();
    verdict(
        3,
        m400 < m100 && m400 < 0.8 * m100 && t < Duration::from_secs(300),
        &format!("median sup error {m100:.4} at n=100, {m400:.4} at n=400 (ratio {:.3}), {t:.1?}", m400 / m100),
    );
}

#[test]
fn criterion_4_uniformity_desk_scale() {
    let start = Instant::now();
    let rows = table1_rows().unwrap();
    let shape = GridShape::auto(400, 3).unwrap();
    let cal = NullCalibration::build(&NullModel::Uniform { d: 3 }, 400, shape, 2000, 4).unwrap();
    let rate = |label: &str| uniformity_rates(dgp(&rows, label), label, 200, &cal, ALPHA, 4).unwrap().0;
    let size = rate("uniform");
    let vmf = rate("vmf k=0.5");
    let tangent = rate("tangent-vmf k=0.2");
    let t = start.elapsed();
    verdict(
        4,
        within(size, 0.02, 0.09) && vmf >= 0.95 && within(tangent, 0.55, 0.78) && t < Duration::from_secs(1800),
        &format!("size {size:.3}, vMF k=0.5 power {vmf:.3}, tangent vMF k=0.2 power {tangent:.3}, {t:.1?}"),
    );
}

#[test]
fn criterion_5_circular_uniformity() {
    let start = Instant::now();
    let rows = table2_rows().unwrap();
    let shape = GridShape::auto(100, 2).unwrap();
    let cal = NullCalibration::build(&NullModel::Uniform { d: 2 }, 100, shape, 2000, 5).unwrap();
    let rate = |label: &str| uniformity_rates(dgp(&rows, label), label, 500, &cal, ALPHA, 5).unwrap().0;
    let size = rate("uniform");
    let skew = rate("sine-skew l=0.35");
    let t = start.elapsed();
    verdict(
        5,
        within(size, 0.03, 0.08) && within(skew, 0.55, 0.72) && t < Duration::from_secs(600),
        &format!("size {size:.3}, sine-skew l=0.35 power {skew:.3}, {t:.1?}"),
    );
}

#[test]
fn criterion_6_manova_null_size() {
    let start = Instant::now();
    let shape = GridShape::new(44, 25, 0).unwrap();
    let (f1, f2) = Fig3Case::Concentration.groups(0.0).unwrap();
    let reps = 200u64;
    let draw = |r: u64| {
        let mut rng = stream(6, "acc-null", r);
        PooledSample::new(vec![f1.sample(500, &mut rng).unwrap(), f2.sample(600, &mut rng).unwrap()]).unwrap()
    };
    let decisions: Vec<[bool; 5]> = (0..reps)
        .into_par_iter()
        .map(|r| manova_decisions(&draw(r), shape, ALPHA, derive_seed(6, "acc-fit", r)).unwrap())
        .collect();
    let mut fit = PooledFit::new(&draw(reps), shape, 6).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, kind) in ScoreKind::ALL.into_iter().enumerate() {
        let rate = decisions.iter().filter(|d| d[k]).count() as f64 / reps as f64;
        let df = fit.test(kind, ALPHA).unwrap().df;
        let expected = if kind == ScoreKind::VmfConcentration { 1 } else { 3 };
        ok &= within(rate, 0.02, 0.09) && df == expected;
        parts.push(format!("{kind} {rate:.3} (df {df}, expected {expected})"));
    }
    let t = start.elapsed();
    verdict(6, ok && t < Duration::from_secs(2700), &format!("{}, {t:.1?}", parts.join("; ")));
}

#[test]
fn criterion_7_manova_power_ordering() {
    let start = Instant::now();
    let shape = GridShape::new(44, 25, 0).unwrap();
    let rate = |rows: &[dirquant::replicate::PowerRow], name: &str| {
        rows.iter().find(|r| r.score == name).unwrap().rejection_rate
    };
    let conc = manova_power(Fig3Case::Concentration, 2.0, (500, 600), shape, 200, ALPHA, 7).unwrap();
    let loc = manova_power(Fig3Case::Location, 0.8, (500, 600), shape, 200, ALPHA, 7).unwrap();
    let pvmf2 = rate(&conc, "pvmf");
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in ScoreKind::ALL {
        let p = rate(&conc, kind.name());
        ok &= p - pvmf2 >= 0.3;
        parts.push(format!("{kind} {p:.3}"));
    }
    let (u1, pvmf1) = (rate(&loc, "uniform"), rate(&loc, "pvmf"));
    ok &= (u1 - pvmf1).abs() <= 0.1;
    let t = start.elapsed();
    verdict(
        7,
        ok && t < Duration::from_secs(2700),
        &format!(
            "case 2 xi=2: {} vs pvmf {pvmf2:.3}; case 1 xi=0.8: uniform {u1:.3} vs pvmf {pvmf1:.3}, {t:.1?}",
            parts.join(", ")
        ),
    );
}

/// Chi-square quantile by bisection on the regularized lower incomplete gamma function.
fn chi2_quantile_oracle(p: f64, df: usize) -> f64 {
    let a = df as f64 / 2.0;
    let (mut lo, mut hi) = (0.0, 200.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_lr(a, mid / 2.0) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_8_numerical_kernels() {
    let mut f_gap = 0.0f64;
    for d in 2..=11usize {
        for k in 0..20 {
            let u = -0.99 + 1.98 * k as f64 / 19.0;
            let h = (d as f64 - 1.0) / 2.0;
            f_gap = f_gap.max((f_star(u, d).unwrap() - beta_reg(h, h, (1.0 + u) / 2.0)).abs());
        }
    }
    let chi_gap = (1..=10)
        .map(|df| (chi2_quantile(0.95, df).unwrap() - chi2_quantile_oracle(0.95, df)).abs())
        .fold(0.0, f64::max);
    let a3 = 1.0 / 5f64.tanh() - 1.0 / 5.0;
    let kappa_gap = (kappa_from_resultant(a3, 3).unwrap() - 5.0).abs();
    // the MLE routes through the same resultant inversion
    let pts = vec![UnitVector::basis(3, 0), UnitVector::new(vec![0.0, 0.6, 0.8]).unwrap()];
    let rbar = {
        let s: Vec<f64> = (0..3).map(|j| pts.iter().map(|p| p.as_slice()[j]).sum::<f64>() / 2.0).collect();
        s.iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    let mle_consistent = (vmf_kappa_mle(&pts).unwrap() - kappa_from_resultant(rbar, 3).unwrap()).abs() < 1e-12;
    verdict(
        8,
        f_gap < 1e-9 && chi_gap < 1e-6 && kappa_gap < 1e-6 && mle_consistent,
        &format!("f_star gap {f_gap:.1e} on 200 points, chi2 quantile gap {chi_gap:.1e}, kappa gap {kappa_gap:.1e}"),
    );
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Option<String> {
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).err().map(|e| format!("{name}: {e}"))
}

#[test]
fn criterion_9_property_suite() {
    let mut failures = Vec::new();
    failures.extend(run_property("cyclical monotonicity", any::<u64>(), |seed| {
        let fam = Family::vmf(UnitVector::basis(3, 0), 4.0).unwrap();
        let sample = fam.sample(30, &mut stream(seed, "acc-cm", 0)).unwrap();
        let t = fit(&sample, GridShape::new(5, 6, 0).unwrap(), seed).unwrap();
        let c = |a: &UnitVector, b: &UnitVector| dirquant::geometry::transport_cost(a, b).unwrap();
        for i in 0..t.len() {
            for k in (i + 1)..t.len() {
                let lhs = c(&sample[i], t.image(i)) + c(&sample[k], t.image(k));
                let rhs = c(&sample[i], t.image(k)) + c(&sample[k], t.image(i));
                prop_assert!(lhs <= rhs + 1e-9);
            }
        }
        Ok(())
    }));
    failures.extend(run_property(
        "Q under constant score shifts",
        (prop::collection::vec(2usize..9, 2..5), 1usize..4, any::<u64>(), prop::collection::vec(-5.0f64..5.0, 3)),
        |(sizes, k, seed, shift)| {
            let n: usize = sizes.iter().sum();
            let mut rng = stream(seed, "acc-shift", 0);
            let scores: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
            let moved: Vec<Vec<f64>> =
                scores.iter().map(|s| s.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect();
            let a = DMatrix::from_fn(k, k, |_, _| rng.random::<f64>());
            let (inv, _) = pseudo_inverse(&(&a * a.transpose() + DMatrix::identity(k, k) * 0.1)).unwrap();
            let q0 = quadratic_form(&deltas(&scores, &sizes).unwrap(), &inv);
            let q1 = quadratic_form(&deltas(&moved, &sizes).unwrap(), &inv);
            prop_assert!((q0 - q1).abs() < 1e-9 * q0.max(1.0));
            Ok(())
        },
    ));
    failures.extend(run_property("T_n range", (any::<u64>(), 0.0f64..20.0), |(seed, kappa)| {
        let fam = Family::vmf(UnitVector::basis(3, 1), kappa).unwrap();
        let sample = fam.sample(25, &mut stream(seed, "acc-tn", 0)).unwrap();
        let t = fit(&sample, GridShape::new(5, 5, 0).unwrap(), seed).unwrap();
        let tn = cvm_from_fit(&t, |z| Ok(z.clone())).unwrap();
        prop_assert!((0.0..=4.0).contains(&tn));
        Ok(())
    }));
    failures.extend(run_property("Penrose identities", (1usize..6, 0usize..6, any::<u64>()), |(k, rank, seed)| {
        let rank = rank.min(k);
        let mut rng = stream(seed, "acc-pinv", 0);
        let b = DMatrix::from_fn(k, rank, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let m = &b * b.transpose();
        let (p, _) = pseudo_inverse(&m).unwrap();
        let tol = 1e-8 * (1.0 + m.amax()) * (1.0 + p.amax());
        let (mp, pm) = (&m * &p, &p * &m);
        prop_assert!((&mp * &m - &m).amax() < tol);
        prop_assert!((&pm * &p - &p).amax() < tol);
        prop_assert!((&mp - mp.transpose()).amax() < tol);
        prop_assert!((&pm - pm.transpose()).amax() < tol);
        Ok(())
    }));
    let detail =
        if failures.is_empty() { "4 properties green on 1000 cases each".to_string() } else { failures.join("; ") };
    verdict(9, failures.is_empty(), &detail);
}
