//! Acceptance suite. Each test prints one `PASS` or `FAIL` line for its criterion and
//! then asserts it. Reference values come from closed forms written out here, from
//! Monte Carlo, or from fixed reference values, never from the code under test.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Mutex, MutexGuard};

use maxconv::copula::disk::DiskCopula;
use maxconv::copula::{Family, MixtureParams, ModelParams};
use maxconv::data::pipeline::{run_pipeline, PipelineConfig, PipelineSource};
use maxconv::data::FixtureSpec;
use maxconv::fit::study::{run_study, StudyConfig};
use maxconv::fit::ParamName;
use maxconv::geometry;
use maxconv::measures::{empirical_lambda, empirical_spearman, rank_transform, Tail};
use maxconv::randomfields::{CompanionSpec, CovarianceSpec, RadiusSpec, SiteSet};
use maxconv::simulate::{
    sample_pair_mixture, sample_pair_z, DiskSimulator, MixtureSimulator, RasterGrid,
};
use maxconv::tailtheory::{self, classify_mixture_tail, RegimeInput, TailKind};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

const ORDER: usize = 35;
/// Quadrature order of the axiom suite, whose tolerance is below the order-35 error.
const FINE_ORDER: usize = 100;

static SERIAL: Mutex<()> = Mutex::new(());

/// Runs criteria one at a time so each runtime budget is measured on its own.
fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes the verdict past the test harness capture so it shows in every run.
fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {id:>2} [{name}]: {} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {id} failed: {detail}");
}

fn radius(rl: f64, ru: f64, theta: f64) -> RadiusSpec {
    RadiusSpec::new(rl, ru, CovarianceSpec::exponential(theta)).unwrap()
}

/// Overlap fraction of two equal disks of radius `r` at distance `h`.
fn equal_disk_fraction(r: f64, h: f64) -> f64 {
    if h >= 2.0 * r {
        return 0.0;
    }
    let a = 2.0 * r * r * (h / (2.0 * r)).acos() - 0.5 * h * (4.0 * r * r - h * h).sqrt();
    a / (PI * r * r)
}

fn pairs_matrix(pairs: &[[f64; 2]]) -> DMatrix<f64> {
    DMatrix::from_fn(pairs.len(), 2, |i, j| pairs[i][j])
}

fn ids(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("s{i}")).collect()
}

/// Kolmogorov–Smirnov distance of a sample to a continuous distribution function.
fn ks_distance<F: Fn(f64) -> f64>(mut x: Vec<f64>, cdf: F) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn c01_lens_area_against_monte_carlo() {
    let _serial = serial();
    let t0 = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1_000_000usize;
    let mut worst: f64 = 0.0;
    let mut worst_at = [0.0; 3];
    let mut violations = 0;
    for _ in 0..1000 {
        let r1 = rng.random_range(0.05..2.0);
        let r2 = rng.random_range(0.05..2.0);
        let h = rng.random_range(0.0..4.5);
        let exact = geometry::lens_area(r1, r2, h).unwrap();
        // sample the intersection of the two bounding boxes
        let (x0, x1) = ((-r1).max(h - r2), r1.min(h + r2));
        let y1 = r1.min(r2);
        if x1 <= x0 {
            if exact != 0.0 {
                violations += 1;
            }
            continue;
        }
        let boxa = (x1 - x0) * 2.0 * y1;
        let mut hits = 0usize;
        for _ in 0..n {
            let x = rng.random_range(x0..x1);
            let y = rng.random_range(-y1..y1);
            if x * x + y * y <= r1 * r1 && (x - h) * (x - h) + y * y <= r2 * r2 {
                hits += 1;
            }
        }
        let est = boxa * hits as f64 / n as f64;
        let p = (exact / boxa).clamp(0.0, 1.0);
        let se = boxa * (p * (1.0 - p) / n as f64).sqrt();
        let z = if se > 0.0 {
            (est - exact).abs() / se
        } else if est == exact {
            0.0
        } else {
            f64::INFINITY
        };
        if z > worst {
            worst = z;
            worst_at = [r1, r2, h];
        }
        if z > 3.0 {
            violations += 1;
        }
    }
    let unit = geometry::lens_area(1.0, 1.0, 1.0).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let pass = violations == 0 && (unit - 1.228370).abs() <= 1e-6 && secs < 60.0;
    report(
        1,
        "lens area vs Monte Carlo",
        pass,
        &format!("{violations} of 1000 beyond 3 SE (worst {worst:.2} SE at {worst_at:.4?}), A(1,1,1) = {unit:.7}, {secs:.1} s"),
    );
}

/// Mean and max of |density - mixed central difference| over the 10 x 10 grid, plus the
/// same statistics off the diagonal.
fn density_grid(sp: &RadiusSpec, h: f64) -> (f64, f64, f64, f64) {
    let c = DiskCopula::new(sp, h, ORDER).unwrap();
    let e = 1e-4;
    let f = |a: f64, b: f64| c.cdf(a, b).unwrap();
    let (mut all, mut off) = (Vec::new(), Vec::new());
    for i in 0..10 {
        for j in 0..10 {
            let (u1, u2) = (0.05 + 0.1 * i as f64, 0.05 + 0.1 * j as f64);
            let fd = (f(u1 + e, u2 + e) - f(u1 + e, u2 - e) - f(u1 - e, u2 + e)
                + f(u1 - e, u2 - e))
                / (4.0 * e * e);
            let d = (c.pdf(u1, u2).unwrap() - fd).abs();
            all.push(d);
            if i != j {
                off.push(d);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    (mean(&all), max(&all), mean(&off), max(&off))
}

#[test]
fn c02_density_against_finite_differences() {
    let _serial = serial();
    let t0 = std::time::Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (rl, ru, th, h) in [(0.1, 0.4, 1.0, 0.1), (0.2, 0.4, 1.0, 0.3)] {
        let (m, x, mo, xo) = density_grid(&radius(rl, ru, th), h);
        pass &= m <= 1e-3 && x <= 5e-3;
        detail.push(format!(
            "({rl},{ru},{th},{h}): mean {m:.2e} max {x:.2e} (off-diagonal mean {mo:.2e} max {xo:.2e})"
        ));
    }
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    report(
        2,
        "density vs finite differences",
        pass,
        &format!("{}; {secs:.1} s", detail.join("; ")),
    );
}

#[test]
fn c03_quadrature_against_simulation() {
    let _serial = serial();
    let t0 = std::time::Instant::now();
    let sp = radius(0.1, 0.4, 1.0);
    let grid: Vec<f64> = (1..=9).map(|i| 0.1 * i as f64).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, h) in [0.1, 0.2, 0.3].into_iter().enumerate() {
        // empirical copula of raster-simulated pairs
        let sites = SiteSet::new(vec![[0.0, 0.0], [h, 0.0]]).unwrap();
        let sim = DiskSimulator::new(&sites, &sp, &RasterGrid::default_for(&sites, &sp).unwrap())
            .unwrap();
        let u = rank_transform(&sim.draw_many(30 + k as u64, 100_000).unwrap(), ids(2)).unwrap();
        let (a, b) = (u.values.column(0), u.values.column(1));
        let c = DiskCopula::new(&sp, h, ORDER).unwrap();
        let mut sup: f64 = 0.0;
        for &x in &grid {
            for &y in &grid {
                let emp = a
                    .iter()
                    .zip(b.iter())
                    .filter(|(p, q)| **p <= x && **q <= y)
                    .count() as f64
                    / a.len() as f64;
                sup = sup.max((emp - c.cdf(x, y).unwrap()).abs());
            }
        }
        // exact pair draws for the tail coefficient and Spearman's rho
        let big = rank_transform(
            &pairs_matrix(&sample_pair_z(&sp, h, 10_000_000, 40 + k as u64).unwrap()),
            ids(2),
        )
        .unwrap();
        let lam_emp = empirical_lambda(&big, 0, 1, 0.999, Tail::Upper).unwrap();
        let lam = tailtheory::lambda_u(h, &sp, ORDER).unwrap();
        drop(big);
        let mid = rank_transform(
            &pairs_matrix(&sample_pair_z(&sp, h, 1_000_000, 50 + k as u64).unwrap()),
            ids(2),
        )
        .unwrap();
        let s_emp = empirical_spearman(&mid, 0, 1).unwrap();
        let s = tailtheory::spearman(h, &sp, ORDER).unwrap();
        pass &= sup <= 0.01 && (lam - lam_emp).abs() <= 0.02 && (s - s_emp).abs() <= 0.01;
        detail.push(format!(
            "h={h}: sup {sup:.4}, lambda {lam:.4} vs {lam_emp:.4}, S {s:.4} vs {s_emp:.4}"
        ));
    }
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs < 900.0;
    report(
        3,
        "quadrature vs simulation",
        pass,
        &format!("{}; {secs:.0} s", detail.join("; ")),
    );
}

#[test]
fn c04_marshall_olkin_degeneracy() {
    let _serial = serial();
    let delta_quoted = 0.390986;
    let delta_exact = 2.0 / 3.0 - 3f64.sqrt() / (2.0 * PI);
    let mo = |u1: f64, u2: f64, d: f64| (u1 * u2.powf(1.0 - d)).min(u2 * u1.powf(1.0 - d));
    let grid: Vec<f64> = (0..21).map(|i| 0.025 + 0.0475 * i as f64).collect();
    let exact = DiskCopula::new(&radius(0.3, 0.3, 1.0), 0.3, ORDER).unwrap();
    let near = DiskCopula::new(&radius(0.3 - 1e-6, 0.3, 1.0), 0.3, ORDER).unwrap();
    let (mut e_q, mut e_x, mut e_n): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for &a in &grid {
        for &b in &grid {
            let v = exact.cdf(a, b).unwrap();
            e_q = e_q.max((v - mo(a, b, delta_quoted)).abs());
            e_x = e_x.max((v - mo(a, b, delta_exact)).abs());
            e_n = e_n.max((near.cdf(a, b).unwrap() - mo(a, b, delta_quoted)).abs());
        }
    }
    let pass = e_q <= 1e-6 && e_n <= 1e-4;
    report(
        4,
        "Marshall-Olkin degeneracy",
        pass,
        &format!(
            "max diff {e_q:.2e} at delta {delta_quoted} ({e_x:.2e} at the exact delta {delta_exact:.7}), near-degenerate {e_n:.2e}"
        ),
    );
}

#[test]
fn c05_lower_tail_order_slope() {
    let _serial = serial();
    let (rl, ru, h) = (0.1, 0.4, 0.3);
    let sp = radius(rl, ru, 1.0);
    let c = DiskCopula::new(&sp, h, ORDER).unwrap();
    let xs: Vec<f64> = (0..10)
        .map(|i| (1e-3f64).ln() + (10f64).ln() * i as f64 / 9.0)
        .collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| c.cdf(x.exp(), x.exp()).unwrap().ln())
        .collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 10.0, ys.iter().sum::<f64>() / 10.0);
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let kappa = 2.0 - equal_disk_fraction(ru, h);
    let lib = tailtheory::kappa_l(h, &sp).unwrap();
    let pass = (slope - kappa).abs() <= 0.05 && (lib - kappa).abs() < 1e-12;
    report(
        5,
        "lower tail order slope",
        pass,
        &format!("slope {slope:.4}, kappa_L {kappa:.4} (library {lib:.4})"),
    );
}

#[test]
fn c06_local_bound() {
    let _serial = serial();
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for sp in [
        radius(0.1, 0.4, 1.0),
        radius(0.0, 0.4, 0.25),
        radius(0.2, 0.5, 2.0),
    ] {
        for i in 1..=20 {
            let h = 2.0 * sp.r_upper * i as f64 / 21.0;
            let k = tailtheory::k0(h, &sp, ORDER).unwrap();
            let bound = 1.0 - k * h * (2.0 * sp.r_lower + h) / (sp.r_upper * sp.r_upper);
            let lam = tailtheory::lambda_u(h, &sp, ORDER).unwrap();
            tightest = tightest.min(bound - lam);
            if lam > bound {
                violations += 1;
            }
        }
    }
    report(
        6,
        "local bound",
        violations == 0,
        &format!("{violations} violations in 60 points, min slack {tightest:.3e}"),
    );
}

fn regime(z: bool, y: bool, beta: f64) -> RegimeInput {
    RegimeInput {
        z_tail: if z {
            TailKind::Dependent
        } else {
            TailKind::Independent
        },
        y_tail: if y {
            TailKind::Dependent
        } else {
            TailKind::Independent
        },
        beta,
        q: 0.3,
        lam_z: if z { 0.6 } else { 0.0 },
        lam_y: if y { 0.25 } else { 0.0 },
        kappa_y: if y { 1.0 } else { 1.5 },
    }
}

/// Conditional exceedance `P(U2 > u | U1 > u)` at the three levels, with the standard
/// error at the highest one.
fn exceedance_curve(params: &MixtureParams, h: f64, seed: u64) -> ([f64; 3], f64) {
    let u = rank_transform(
        &pairs_matrix(&sample_pair_mixture(params, h, 1_000_000, seed).unwrap()),
        ids(2),
    )
    .unwrap();
    let p = [0.95, 0.99, 0.995].map(|l| empirical_lambda(&u, 1, 0, l, Tail::Upper).unwrap());
    (p, (p[2] * (1.0 - p[2]) / 5000.0).sqrt())
}

fn t_tail_dependence(rho: f64, nu: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, nu + 1.0).unwrap();
    2.0 * t.cdf(-((nu + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt())
}

#[test]
fn c07_mixture_tail_regimes() {
    let _serial = serial();
    // (Z dependent, Y dependent, beta, lambda, tail order where stated)
    let (q, lz, ly) = (0.3, 0.6, 0.25);
    let table: [(bool, bool, f64, f64, Option<f64>); 11] = [
        (true, true, 0.8, ly, None),
        (true, true, 1.0, q * lz + (1.0 - q) * ly, None),
        (true, true, 1.5, lz, None),
        (true, false, 0.8, 0.0, Some(1.25f64.min(1.5))),
        (true, false, 1.0, q * lz, None),
        (true, false, 1.5, lz, None),
        (false, true, 0.8, ly, None),
        (false, true, 1.0, (1.0 - q) * ly, None),
        (false, true, 1.5, 0.0, Some(1.5)),
        (false, false, 0.8, 0.0, Some(1.5f64.min(2.5))),
        (false, false, 1.5, 0.0, Some(2.25f64.min(2.0))),
    ];
    let mut wrong = Vec::new();
    for (z, y, b, lam, kap) in table {
        let out = classify_mixture_tail(&regime(z, y, b)).unwrap();
        let ok = (out.lambda_tilde - lam).abs() < 1e-15
            && kap.is_none_or(|k| out.kappa_tilde.is_some_and(|v| (v - k).abs() < 1e-15));
        if !ok {
            wrong.push(format!("(Z {z}, Y {y}, beta {b}): {out:?}"));
        }
    }
    let both_indep_one = classify_mixture_tail(&regime(false, false, 1.0)).unwrap();
    if both_indep_one.lambda_tilde != 0.0 || both_indep_one.kappa_tilde != Some(1.5) {
        wrong.push(format!("(Z false, Y false, beta 1): {both_indep_one:?}"));
    }

    // simulation trend at four configurations
    let rad = radius(0.0, 0.4, 0.25);
    let y_cov = CovarianceSpec::exponential(0.5);
    let gauss = |q| MixtureParams {
        radius: rad,
        q,
        companion: CompanionSpec::Gaussian { cov: y_cov },
    };
    let student = |beta| MixtureParams {
        radius: rad,
        q: 0.2,
        companion: CompanionSpec::StudentFrechet {
            cov: y_cov,
            nu: 3.0,
            beta,
        },
    };
    let far = 0.9;
    let cases = [
        (
            "gaussian, h=0.1",
            gauss(0.2),
            0.1,
            tailtheory::lambda_u(0.1, &rad, ORDER).unwrap(),
        ),
        ("gaussian, h=0.9", gauss(0.2), far, 0.0),
        (
            "t beta=0.8, h=0.9",
            student(0.8),
            far,
            t_tail_dependence(y_cov.correlation(far), 3.0),
        ),
        ("t beta=1.5, h=0.9", student(1.5), far, 0.0),
    ];
    let mut trend = Vec::new();
    let mut trend_ok = true;
    for (k, (name, params, h, lam)) in cases.into_iter().enumerate() {
        let (p, se) = exceedance_curve(&params, h, 70 + k as u64);
        let ok = if lam > 0.0 {
            p[2] > 0.5 * lam && (p[2] - lam).abs() <= (p[0] - lam).abs() + 3.0 * se
        } else {
            p[0] >= p[1] && p[1] >= p[2] - se && p[2] < p[0] - 3.0 * se
        };
        trend_ok &= ok;
        trend.push(format!(
            "{name}: lambda~ {lam:.3}, P = {:.3}/{:.3}/{:.3}",
            p[0], p[1], p[2]
        ));
    }
    let pass = wrong.is_empty() && trend_ok;
    report(
        7,
        "mixture tail regimes",
        pass,
        &format!(
            "{} of 12 regime outcomes wrong {wrong:?}; trend {}",
            wrong.len(),
            trend.join("; ")
        ),
    );
}

fn study_line(study: u8, reference: &[(ParamName, f64)], budget_secs: f64) -> (bool, String) {
    let t0 = std::time::Instant::now();
    let cfg = StudyConfig::desk(study, 2024 + study as u64);
    let report = run_study(&cfg, |_| {}).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, v) in reference {
        let r = report.rmse[name];
        pass &= r <= 2.0 * v;
        parts.push(format!("{} {r:.4} (limit {:.2})", name.label(), 2.0 * v));
    }
    let conv = report.replicates.iter().filter(|r| r.converged).count();
    let secs = t0.elapsed().as_secs_f64();
    pass &= secs < budget_secs;
    (
        pass,
        format!(
            "N={} p={} n={}: {}; {conv} converged; {secs:.0} s (budget {budget_secs:.0} s)",
            cfg.replicates,
            cfg.p,
            cfg.n,
            parts.join(", "),
        ),
    )
}

#[test]
fn c08_study_one_rmse() {
    let _serial = serial();
    let (pass, detail) = study_line(
        1,
        &[(ParamName::RUpper, 0.02), (ParamName::ThetaR, 0.03)],
        2700.0,
    );
    report(8, "study 1 RMSE", pass, &detail);
}

#[test]
fn c09_study_two_rmse() {
    let _serial = serial();
    let (pass, detail) = study_line(
        2,
        &[
            (ParamName::RUpper, 0.03),
            (ParamName::ThetaR, 0.04),
            (ParamName::ThetaY, 0.04),
            (ParamName::Q, 0.01),
        ],
        5400.0,
    );
    report(9, "study 2 RMSE", pass, &detail);
}

#[test]
fn c10_study_three_discrepancy() {
    let _serial = serial();
    let t0 = std::time::Instant::now();
    let cfg = StudyConfig::desk(3, 2027);
    let report_ = run_study(&cfg, |_| {}).unwrap();
    let d = report_.mean_discrepancy.unwrap();
    let pass = d.s_rho <= 0.05 && d.rho_l <= 0.06 && d.rho_u <= 0.07;
    report(
        10,
        "study 3 dependence discrepancy",
        pass,
        &format!(
            "N={}: S_rho {:.4}, rho_L {:.4}, rho_U {:.4}; {:.0} s",
            cfg.replicates,
            d.s_rho,
            d.rho_l,
            d.rho_u,
            t0.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn c11_marginal_laws() {
    let _serial = serial();
    let one = SiteSet::new(vec![[0.0, 0.0]]).unwrap();
    let sp = radius(0.1, 0.4, 1.0);
    let grid = RasterGrid::default_for(&one, &sp).unwrap();
    let z = DiskSimulator::new(&one, &sp, &grid)
        .unwrap()
        .draw_many(11, 100_000)
        .unwrap();
    let ks_z = ks_distance(z.column(0).iter().copied().collect(), |x| (-1.0 / x).exp());

    let normal = Normal::new(0.0, 1.0).unwrap();
    let y_cov = CovarianceSpec::exponential(0.5);
    let mut detail = vec![format!("Frechet KS {ks_z:.4}")];
    let mut pass = ks_z < 0.01;
    let mixtures = [
        ("gaussian", CompanionSpec::Gaussian { cov: y_cov }),
        (
            "t/Frechet",
            CompanionSpec::StudentFrechet {
                cov: y_cov,
                nu: 3.0,
                beta: 1.2,
            },
        ),
    ];
    for (k, (name, companion)) in mixtures.into_iter().enumerate() {
        let q = 0.2;
        let params = MixtureParams {
            radius: sp,
            q,
            companion,
        };
        let x = MixtureSimulator::new(&one, &params, &grid)
            .unwrap()
            .draw_many(12 + k as u64, 100_000)
            .unwrap();
        let f_y = |y: f64| match companion {
            CompanionSpec::Gaussian { .. } => normal.cdf(y),
            CompanionSpec::StudentFrechet { beta, .. } => {
                if y <= 0.0 {
                    0.0
                } else {
                    (-y.powf(-beta)).exp()
                }
            }
        };
        let ks = ks_distance(x.column(0).iter().copied().collect(), |v| {
            if v <= 0.0 {
                0.0
            } else {
                (-q / v).exp() * f_y(v / (1.0 - q))
            }
        });
        pass &= ks < 0.01;
        detail.push(format!("{name} mixture KS {ks:.4}"));
    }
    report(11, "marginal laws", pass, &detail.join(", "));
}

fn pipeline_winner(model: ModelParams, fixture_seed: u64, seed: u64) -> (Option<Family>, String) {
    let mut cfg = PipelineConfig::new(
        PipelineSource::Fixture(FixtureSpec::new(40, 300, model, fixture_seed)),
        seed,
    );
    cfg.families = vec![Family::M1, Family::M3, Family::M4];
    cfg.controls.starts = 2;
    let (_, rep) = run_pipeline(&cfg, |_, _| {}).unwrap();
    let agg: Vec<String> = rep
        .aggregate
        .iter()
        .map(|(f, a)| format!("{f} {a:.4}"))
        .collect();
    (rep.best(), agg.join(" "))
}

#[test]
fn c12_pipeline_self_consistency() {
    let _serial = serial();
    let t0 = std::time::Instant::now();
    let m4 = ModelParams::M4(MixtureParams {
        radius: radius(0.0, 150.0, 100.0),
        q: 0.2,
        companion: CompanionSpec::Gaussian {
            cov: CovarianceSpec::exponential(200.0),
        },
    });
    let m1 = ModelParams::M1 {
        cov: CovarianceSpec::exponential(200.0),
    };
    let (best4, agg4) = pipeline_winner(m4, 11, 12);
    let (best1, agg1) = pipeline_winner(m1, 13, 14);
    let secs = t0.elapsed().as_secs_f64();
    let pass = best4 == Some(Family::M4) && best1 == Some(Family::M1) && secs < 1800.0;
    report(
        12,
        "pipeline self-consistency",
        pass,
        &format!("M4 fixture: {agg4}; Gaussian fixture: {agg1}; {secs:.0} s"),
    );
}

#[test]
fn c13_copula_axioms() {
    let _serial = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let tol = 1e-9;
    let grid: Vec<f64> = (1..=9).map(|i| 0.1 * i as f64).collect();
    let mut fails: Vec<String> = Vec::new();
    for k in 0..100 {
        let ru = rng.random_range(0.1..0.8);
        let rl = rng.random_range(0.0..ru);
        let th = rng.random_range(0.1..2.0);
        let h = rng.random_range(1e-3..2.2 * ru);
        let sp = radius(rl, ru, th);
        let c = DiskCopula::new(&sp, h, FINE_ORDER).unwrap();
        let cdf = |a: f64, b: f64| c.cdf(a, b).unwrap();
        let mut bad = |what: &str| {
            fails.push(format!(
                "config {k} ({rl:.3},{ru:.3},{th:.3},{h:.3}): {what}"
            ))
        };
        for &u in &grid {
            if (cdf(u, 1.0 - 1e-15) - u).abs() > tol || (cdf(1.0 - 1e-15, u) - u).abs() > tol {
                bad("margin");
            }
        }
        for (i, &a) in grid.iter().enumerate() {
            for (j, &b) in grid.iter().enumerate() {
                let v = cdf(a, b);
                if v < (a + b - 1.0).max(0.0) - tol || v > a.min(b) + tol {
                    bad("Frechet bounds");
                }
                if (v - cdf(b, a)).abs() > tol {
                    bad("exchangeability");
                }
                if i > 0 && j > 0 {
                    let (a0, b0) = (grid[i - 1], grid[j - 1]);
                    if v - cdf(a0, b) - cdf(a, b0) + cdf(a0, b0) < -tol {
                        bad("2-increasing");
                    }
                }
            }
        }
        let lam = tailtheory::lambda_u(h, &sp, FINE_ORDER).unwrap();
        let l11 = tailtheory::stdf_disk(1.0, 1.0, h, &sp, FINE_ORDER).unwrap();
        let l22 = tailtheory::stdf_disk(2.0, 2.0, h, &sp, FINE_ORDER).unwrap();
        if (lam - (2.0 - l11)).abs() > tol {
            bad("lambda_U = 2 - l(1,1)");
        }
        if (l22 - 2.0 * l11).abs() > tol || l11 < 1.0 - tol || l11 > 2.0 + tol {
            bad("stable tail function homogeneity or bounds");
        }
    }
    let pass = fails.is_empty();
    report(
        13,
        "copula axioms",
        pass,
        &format!(
            "{} violations over 100 configurations {:?}",
            fails.len(),
            fails.iter().take(5).collect::<Vec<_>>()
        ),
    );
}
