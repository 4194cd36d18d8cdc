//! Rank-based dependence statistics: pseudo-observations, Spearman's rho, empirical
//! tail-dependence ratios and power-weighted tail correlations.

use std::io::Write;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::numerics::dist::norm_cdf;
use crate::randomfields::{stream_rng, SiteSet};

/// Default power of the tail-weighted correlations.
pub const DEFAULT_POWER: u32 = 6;
/// Minimum number of marginal exceedances for an empirical tail ratio.
pub const MIN_EXCEEDANCES: usize = 20;
/// Gaussian pairs simulated for the reference measure.
pub const GAUSSIAN_REFERENCE_DRAWS: usize = 100_000;
const GAUSSIAN_REFERENCE_SEED: u64 = 0x6761_7573_735f_7265;

/// Observations on the unit scale, one column per site.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservations {
    pub values: DMatrix<f64>,
    pub site_ids: Vec<String>,
}

impl PseudoObservations {
    pub fn new(values: DMatrix<f64>, site_ids: Vec<String>) -> Result<Self> {
        if site_ids.len() != values.ncols() {
            return Err(Error::Dimension(format!(
                "{} site ids for {} columns",
                site_ids.len(),
                values.ncols()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return domain(format!("pseudo-observation {v} outside (0, 1)"));
        }
        Ok(PseudoObservations { values, site_ids })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    fn column(&self, j: usize) -> Result<&[f64]> {
        if j >= self.ncols() {
            return Err(Error::Dimension(format!(
                "column {j} out of range for {} columns",
                self.ncols()
            )));
        }
        let n = self.nrows();
        Ok(&self.values.as_slice()[j * n..(j + 1) * n])
    }

    fn pair(&self, j1: usize, j2: usize) -> Result<(&[f64], &[f64])> {
        Ok((self.column(j1)?, self.column(j2)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Upper,
    Lower,
}

/// Average ranks of `x` divided by `n + 1`.
pub fn ranks(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return invalid(format!("non-finite value {v} in rank transform"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        // ranks i+1..=j share their mean
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            out[k] = r / (n + 1) as f64;
        }
        i = j;
    }
    Ok(out)
}

/// Column-wise rank transform with average ranks for ties.
pub fn rank_transform(data: &DMatrix<f64>, site_ids: Vec<String>) -> Result<PseudoObservations> {
    let (n, p) = data.shape();
    if n < 2 {
        return invalid(format!("rank transform needs at least 2 rows, got {n}"));
    }
    let mut values = DMatrix::zeros(n, p);
    for j in 0..p {
        let col: Vec<f64> = data.column(j).iter().copied().collect();
        if col.iter().all(|v| *v == col[0]) {
            return Err(Error::Degenerate(format!("column {j} is constant")));
        }
        values.set_column(j, &nalgebra::DVector::from_vec(ranks(&col)?));
    }
    PseudoObservations::new(values, site_ids)
}

/// Sample Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "columns of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let scale = (saa * sbb).sqrt();
    if !(scale > 0.0) || saa <= 1e-28 * n || sbb <= 1e-28 * n {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((sab / scale).clamp(-1.0, 1.0))
}

/// Spearman's rho: correlation of the two rank columns.
pub fn empirical_spearman(u: &PseudoObservations, j1: usize, j2: usize) -> Result<f64> {
    if u.nrows() < 3 {
        return invalid(format!("Spearman's rho needs n >= 3, got {}", u.nrows()));
    }
    let (a, b) = u.pair(j1, j2)?;
    correlation(a, b)
}

/// Joint over marginal exceedance ratio `P(U1 > l, U2 > l) / P(U2 > l)`; the lower tail
/// uses `U < 1 - l`.
pub fn empirical_lambda(
    u: &PseudoObservations,
    j1: usize,
    j2: usize,
    level: f64,
    tail: Tail,
) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("level must lie in (0, 1), got {level}"));
    }
    let (a, b) = u.pair(j1, j2)?;
    let hit = |x: f64| match tail {
        Tail::Upper => x > level,
        Tail::Lower => x < 1.0 - level,
    };
    let mut marginal = 0usize;
    let mut joint = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if hit(y) {
            marginal += 1;
            if hit(x) {
                joint += 1;
            }
        }
    }
    if marginal < MIN_EXCEEDANCES {
        return Err(Error::InsufficientTailData(format!(
            "{marginal} exceedances at level {level}, need {MIN_EXCEEDANCES}"
        )));
    }
    Ok(joint as f64 / marginal as f64)
}

fn weight(u: f64, tail: Tail, k: u32) -> f64 {
    match tail {
        Tail::Upper => u.powi(k as i32),
        Tail::Lower => (1.0 - u).powi(k as i32),
    }
}

/// Correlation of `a(U1)` and `a(U2)` with `a(u) = u^k` for the upper tail and
/// `(1 - u)^k` for the lower one.
pub fn tail_weighted_columns(a: &[f64], b: &[f64], tail: Tail, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::Degenerate(
            "power 0 gives a constant transform".into(),
        ));
    }
    if a.len() < 50 {
        return invalid(format!(
            "tail-weighted measure needs n >= 50, got {}",
            a.len()
        ));
    }
    let ta: Vec<f64> = a.iter().map(|&u| weight(u, tail, k)).collect();
    let tb: Vec<f64> = b.iter().map(|&u| weight(u, tail, k)).collect();
    correlation(&ta, &tb)
}

pub fn tail_weighted(
    u: &PseudoObservations,
    j1: usize,
    j2: usize,
    tail: Tail,
    k: u32,
) -> Result<f64> {
    let (a, b) = u.pair(j1, j2)?;
    tail_weighted_columns(a, b, tail, k)
}

/// Gaussian copula sample at correlation `rho` built from fixed standard normal draws,
/// so that every call at the same `rho` sees the same sample.
#[derive(Debug, Clone)]
pub struct GaussianReference {
    x: Vec<f64>,
    e: Vec<f64>,
    ux: Vec<f64>,
}

impl Default for GaussianReference {
    fn default() -> Self {
        Self::new(GAUSSIAN_REFERENCE_DRAWS, GAUSSIAN_REFERENCE_SEED)
    }
}

impl GaussianReference {
    pub fn new(draws: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0);
        let mut x = Vec::with_capacity(draws);
        let mut e = Vec::with_capacity(draws);
        for _ in 0..draws {
            x.push(StandardNormal.sample(&mut rng));
            e.push(StandardNormal.sample(&mut rng));
        }
        let ux = x.iter().map(|&v| norm_cdf(v)).collect();
        GaussianReference { x, e, ux }
    }

    /// Gaussian correlation matching Spearman's rho `s`.
    pub fn rho_from_spearman(s: f64) -> f64 {
        2.0 * (std::f64::consts::PI * s / 6.0).sin()
    }

    /// Tail-weighted measure of the Gaussian copula at correlation `rho`.
    pub fn measure(&self, rho: f64, tail: Tail, k: u32) -> Result<f64> {
        if !(-1.0..=1.0).contains(&rho) {
            return domain(format!("correlation {rho} outside [-1, 1]"));
        }
        let c = (1.0 - rho * rho).max(0.0).sqrt();
        let uy: Vec<f64> = self
            .x
            .iter()
            .zip(&self.e)
            .map(|(&x, &e)| norm_cdf(rho * x + c * e))
            .collect();
        tail_weighted_columns(&self.ux, &uy, tail, k)
    }

    /// Reference measure for the pair `(j1, j2)` of `u`; the same in both tails.
    pub fn for_pair(&self, u: &PseudoObservations, j1: usize, j2: usize, k: u32) -> Result<f64> {
        if u.nrows() < 50 {
            return invalid(format!(
                "tail-weighted measure needs n >= 50, got {}",
                u.nrows()
            ));
        }
        let s = empirical_spearman(u, j1, j2)?;
        self.measure(Self::rho_from_spearman(s), Tail::Upper, k)
    }
}

/// Gaussian reference with the default draw count and seed.
pub fn gaussian_reference(u: &PseudoObservations, j1: usize, j2: usize, k: u32) -> Result<f64> {
    GaussianReference::default().for_pair(u, j1, j2, k)
}

/// One row of the pairwise summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub site1: String,
    pub site2: String,
    pub distance: f64,
    pub s_rho: f64,
    pub rho_l: f64,
    pub rho_u: f64,
    pub rho_n: f64,
    /// Empty when the level leaves too few exceedances.
    pub lambda_hat: Option<f64>,
}

/// Options of [`pairwise_summary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryOptions {
    pub power: u32,
    pub lambda_level: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            power: DEFAULT_POWER,
            lambda_level: 0.95,
        }
    }
}

/// Statistics for every pair of columns, in row-major pair order.
pub fn pairwise_summary(
    u: &PseudoObservations,
    sites: &SiteSet,
    opts: SummaryOptions,
) -> Result<Vec<PairSummary>> {
    if sites.len() != u.ncols() {
        return Err(Error::Dimension(format!(
            "{} sites for {} columns",
            sites.len(),
            u.ncols()
        )));
    }
    let reference = GaussianReference::default();
    let p = u.ncols();
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, j)| {
            let s_rho = empirical_spearman(u, i, j)?;
            let lambda_hat = match empirical_lambda(u, i, j, opts.lambda_level, Tail::Upper) {
                Ok(v) => Some(v),
                Err(Error::InsufficientTailData(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(PairSummary {
                site1: u.site_ids[i].clone(),
                site2: u.site_ids[j].clone(),
                distance: sites.distance(i, j),
                s_rho,
                rho_l: tail_weighted(u, i, j, Tail::Lower, opts.power)?,
                rho_u: tail_weighted(u, i, j, Tail::Upper, opts.power)?,
                rho_n: reference.measure(
                    GaussianReference::rho_from_spearman(s_rho),
                    Tail::Upper,
                    opts.power,
                )?,
                lambda_hat,
            })
        })
        .collect()
}

pub fn write_pairwise_csv<W: Write>(out: W, rows: &[PairSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "site1",
        "site2",
        "distance",
        "S_rho",
        "rho_L",
        "rho_U",
        "rho_N",
        "lambda_hat",
    ])?;
    for r in rows {
        w.write_record([
            r.site1.clone(),
            r.site2.clone(),
            r.distance.to_string(),
            r.s_rho.to_string(),
            r.rho_l.to_string(),
            r.rho_u.to_string(),
            r.rho_n.to_string(),
            r.lambda_hat.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
