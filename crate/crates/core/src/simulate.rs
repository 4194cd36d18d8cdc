//! Simulation of the disk max-convolution process and its max-mixture, plus Monte Carlo
//! evaluators for processes driven by a generic random area vector.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{MixtureParams, ModelParams};
use crate::error::{check_finite, invalid, Error, Result};
use crate::geometry::lens_area_unchecked;
use crate::numerics::dist::norm_cdf;
use crate::randomfields::{
    stream_rng, CompanionSampler, CompanionSpec, GpSampler, RadiusSpec, SiteSet,
};

/// Parameters of the disk max-convolution process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskModelParams {
    pub radius: RadiusSpec,
}

/// Square cells carrying independent Fréchet maxima of the sup-measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterGrid {
    pub side: f64,
    pub origin: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl RasterGrid {
    /// Grid with cell side `side` covering every site padded by `pad`.
    pub fn covering(sites: &SiteSet, pad: f64, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return invalid(format!("cell side must be positive, got {side}"));
        }
        if sites.is_empty() {
            return invalid("raster needs at least one site");
        }
        let planar = sites.planar();
        let (mut x0, mut y0, mut x1, mut y1) = (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        );
        for c in &planar.coords {
            x0 = x0.min(c[0]);
            y0 = y0.min(c[1]);
            x1 = x1.max(c[0]);
            y1 = y1.max(c[1]);
        }
        let origin = [x0 - pad - side, y0 - pad - side];
        let nx = ((x1 - x0 + 2.0 * pad) / side).ceil() as usize + 2;
        let ny = ((y1 - y0 + 2.0 * pad) / side).ceil() as usize + 2;
        Ok(RasterGrid {
            side,
            origin,
            nx,
            ny,
        })
    }

    /// Default grid: cell side `r_upper / 50`, padded by `r_upper`.
    pub fn default_for(sites: &SiteSet, radius: &RadiusSpec) -> Result<Self> {
        Self::covering(sites, radius.r_upper, radius.r_upper / 50.0)
    }

    fn check_resolution(&self, radius: &RadiusSpec) -> Result<()> {
        if radius.r_lower > 0.0 {
            let cells = PI * radius.r_lower * radius.r_lower / (self.side * self.side);
            if cells < 100.0 {
                return Err(Error::Resolution(format!(
                    "only {cells:.1} cells fit in the smallest disk (radius {}); use a cell side below {:.3e}",
                    radius.r_lower,
                    radius.r_lower * (PI / 100.0).sqrt()
                )));
            }
        }
        Ok(())
    }
}

/// SplitMix64 finaliser.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform bits of cell `(ix, iy)` in one replicate, shared by every site.
#[inline]
fn cell_bits(key: u64, ix: usize, iy: usize) -> u64 {
    mix(key ^ mix((ix as u64) << 32 | iy as u64))
}

/// Unit Fréchet variable `-1 / ln U` from 64 random bits.
#[inline]
fn frechet_from_bits(bits: u64) -> f64 {
    let u = ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    -1.0 / u.ln()
}

/// Unit Fréchet variable from a generator.
pub fn unit_frechet<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    -1.0 / u.ln()
}

/// Maximum over the cells whose centres lie within `r` of `c`, normalised by the
/// covered area so that the result is exactly unit Fréchet. A disk that covers no
/// centre falls back to the cell containing `c`.
fn disk_max(grid: &RasterGrid, key: u64, c: [f64; 2], r: f64) -> Result<f64> {
    let s = grid.side;
    let to_ix = |v: f64, o: f64| (v - o) / s - 0.5;
    let ix0 = to_ix(c[0] - r, grid.origin[0]).ceil();
    let ix1 = to_ix(c[0] + r, grid.origin[0]).floor();
    let iy0 = to_ix(c[1] - r, grid.origin[1]).ceil();
    let iy1 = to_ix(c[1] + r, grid.origin[1]).floor();
    if ix0 < 0.0 || iy0 < 0.0 || ix1 >= grid.nx as f64 || iy1 >= grid.ny as f64 {
        return invalid(format!(
            "raster does not cover the disk of radius {r} at {c:?}"
        ));
    }
    let r2 = r * r;
    let (mut best, mut count) = (0u64, 0usize);
    let mut iy = iy0 as usize;
    while iy as f64 <= iy1 {
        let dy = grid.origin[1] + (iy as f64 + 0.5) * s - c[1];
        let rem = r2 - dy * dy;
        if rem > 0.0 {
            let half = rem.sqrt();
            let lo = to_ix(c[0] - half, grid.origin[0]).ceil().max(ix0) as usize;
            let hi = to_ix(c[0] + half, grid.origin[0]).floor().min(ix1);
            let mut ix = lo;
            while ix as f64 <= hi {
                let dx = grid.origin[0] + (ix as f64 + 0.5) * s - c[0];
                if dx * dx + dy * dy < r2 {
                    best = best.max(cell_bits(key, ix, iy) >> 11);
                    count += 1;
                }
                ix += 1;
            }
        }
        iy += 1;
    }
    if count == 0 {
        let ix = ((c[0] - grid.origin[0]) / s).floor() as usize;
        let iy = ((c[1] - grid.origin[1]) / s).floor() as usize;
        best = cell_bits(key, ix, iy) >> 11;
        count = 1;
    }
    Ok(frechet_from_bits(best << 11) / count as f64)
}

fn replicate_key(seed: u64, replicate: u64) -> u64 {
    mix(mix(seed ^ 0x5eed_0f_ce11) ^ replicate.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Reusable simulator of the disk process at fixed sites.
#[derive(Debug, Clone)]
pub struct DiskSimulator {
    coords: Vec<[f64; 2]>,
    radius: RadiusSpec,
    grid: RasterGrid,
    gp: Option<GpSampler>,
}

impl DiskSimulator {
    pub fn new(sites: &SiteSet, radius: &RadiusSpec, grid: &RasterGrid) -> Result<Self> {
        radius.validate()?;
        grid.check_resolution(radius)?;
        let gp = if radius.r_lower < radius.r_upper {
            Some(GpSampler::new(sites, &radius.cov)?)
        } else {
            None
        };
        Ok(DiskSimulator {
            coords: sites.planar().coords,
            radius: *radius,
            grid: *grid,
            gp,
        })
    }

    /// Replicate `replicate` under `seed`.
    pub fn draw(&self, seed: u64, replicate: u64) -> Result<Vec<f64>> {
        let mut rng = stream_rng(seed, 2 * replicate);
        let radii: Vec<f64> = match &self.gp {
            Some(gp) => gp
                .sample(&mut rng)
                .into_iter()
                .map(|g| self.radius.radius_from_score(g))
                .collect(),
            None => vec![self.radius.r_upper; self.coords.len()],
        };
        let key = replicate_key(seed, replicate);
        self.coords
            .iter()
            .zip(&radii)
            .map(|(&c, &r)| disk_max(&self.grid, key, c, r))
            .collect()
    }

    /// `n` replicates as rows of an `n x p` matrix.
    pub fn draw_many(&self, seed: u64, n: usize) -> Result<DMatrix<f64>> {
        let rows: Vec<Vec<f64>> = (0..n as u64)
            .into_par_iter()
            .map(|k| self.draw(seed, k))
            .collect::<Result<_>>()?;
        Ok(rows_to_matrix(&rows, self.coords.len()))
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j])
}

/// One draw of the disk process at `sites`.
pub fn simulate_z(
    sites: &SiteSet,
    params: &DiskModelParams,
    grid: &RasterGrid,
    seed: u64,
) -> Result<Vec<f64>> {
    DiskSimulator::new(sites, &params.radius, grid)?.draw(seed, 0)
}

/// Reusable simulator of the max-mixture at fixed sites.
#[derive(Debug, Clone)]
pub struct MixtureSimulator {
    disk: DiskSimulator,
    q: f64,
    companion: Option<CompanionSampler>,
}

impl MixtureSimulator {
    pub fn new(sites: &SiteSet, params: &MixtureParams, grid: &RasterGrid) -> Result<Self> {
        params.validate()?;
        let disk = DiskSimulator::new(sites, &params.radius, grid)?;
        let companion = if params.q < 1.0 {
            Some(CompanionSampler::new(sites, &params.companion)?)
        } else {
            None
        };
        Ok(MixtureSimulator {
            disk,
            q: params.q,
            companion,
        })
    }

    pub fn draw(&self, seed: u64, replicate: u64) -> Result<Vec<f64>> {
        let z = self.disk.draw(seed, replicate)?;
        let Some(c) = &self.companion else {
            return Ok(z);
        };
        let mut rng = stream_rng(seed, 2 * replicate + 1);
        let y = c.sample(&mut rng);
        Ok(z.iter()
            .zip(&y)
            .map(|(&z, &y)| (self.q * z).max((1.0 - self.q) * y))
            .collect())
    }

    pub fn draw_many(&self, seed: u64, n: usize) -> Result<DMatrix<f64>> {
        let rows: Vec<Vec<f64>> = (0..n as u64)
            .into_par_iter()
            .map(|k| self.draw(seed, k))
            .collect::<Result<_>>()?;
        Ok(rows_to_matrix(&rows, self.disk.coords.len()))
    }
}

/// One draw of the max-mixture at `sites`.
pub fn simulate_mixture(
    sites: &SiteSet,
    params: &MixtureParams,
    grid: &RasterGrid,
    seed: u64,
) -> Result<Vec<f64>> {
    MixtureSimulator::new(sites, params, grid)?.draw(seed, 0)
}

/// `n` replicates of any model family at `sites`, one row per replicate, on the default
/// raster. The Gaussian and t families are simulated on their own scale.
pub fn simulate_model(
    params: &ModelParams,
    sites: &SiteSet,
    n: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    params.validate()?;
    let field = |spec: CompanionSpec| -> Result<DMatrix<f64>> {
        let sampler = CompanionSampler::new(sites, &spec)?;
        let rows: Vec<Vec<f64>> = (0..n as u64)
            .into_par_iter()
            .map(|k| sampler.sample(&mut stream_rng(seed, 2 * k + 1)))
            .collect();
        Ok(rows_to_matrix(&rows, sites.len()))
    };
    match params {
        ModelParams::M1 { cov } => field(CompanionSpec::Gaussian { cov: *cov }),
        // a Fréchet transform of the t field leaves its copula unchanged
        ModelParams::M2 { cov, nu } => field(CompanionSpec::StudentFrechet {
            cov: *cov,
            nu: *nu,
            beta: 1.0,
        }),
        ModelParams::M3 { radius } => {
            let grid = RasterGrid::default_for(sites, radius)?;
            DiskSimulator::new(sites, radius, &grid)?.draw_many(seed, n)
        }
        ModelParams::M4(m) | ModelParams::M5(m) => {
            let grid = RasterGrid::default_for(sites, &m.radius)?;
            MixtureSimulator::new(sites, m, &grid)?.draw_many(seed, n)
        }
    }
}

/// Areas `(A1, A2, A12)` of the two exclusive parts and the overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaVectorSample {
    pub a1: f64,
    pub a2: f64,
    pub a12: f64,
}

impl AreaVectorSample {
    pub fn new(a1: f64, a2: f64, a12: f64) -> Result<Self> {
        for (n, v) in [("a1", a1), ("a2", a2), ("a12", a12)] {
            check_finite(n, v)?;
            if v < 0.0 {
                return invalid(format!("{n} must be non-negative, got {v}"));
            }
        }
        Ok(AreaVectorSample { a1, a2, a12 })
    }

    /// Areas of two disks with radii `r1`, `r2` at distance `h`.
    pub fn disks(r1: f64, r2: f64, h: f64) -> Self {
        let a12 = lens_area_unchecked(r1, r2, h);
        AreaVectorSample {
            a1: (PI * r1 * r1 - a12).max(0.0),
            a2: (PI * r2 * r2 - a12).max(0.0),
            a12,
        }
    }
}

/// Source of random area vectors; `None` once exhausted.
pub trait AreaSampler {
    fn next_sample(&mut self) -> Option<AreaVectorSample>;
}

/// Always returns the same areas.
#[derive(Debug, Clone, Copy)]
pub struct FixedAreas(pub AreaVectorSample);

impl AreaSampler for FixedAreas {
    fn next_sample(&mut self) -> Option<AreaVectorSample> {
        Some(self.0)
    }
}

/// Replays a finite list of samples.
#[derive(Debug, Clone)]
pub struct ListedAreas {
    items: Vec<AreaVectorSample>,
    pos: usize,
}

impl ListedAreas {
    pub fn new(items: Vec<AreaVectorSample>) -> Self {
        ListedAreas { items, pos: 0 }
    }
}

impl AreaSampler for ListedAreas {
    fn next_sample(&mut self) -> Option<AreaVectorSample> {
        let s = self.items.get(self.pos).copied();
        self.pos += 1;
        s
    }
}

/// Correlated radius pair of the disk model at distance `h`.
#[derive(Debug, Clone)]
pub struct RadiusPairSampler {
    radius: RadiusSpec,
    rho: f64,
    s: f64,
}

impl RadiusPairSampler {
    pub fn new(radius: &RadiusSpec, h: f64) -> Result<Self> {
        radius.validate()?;
        check_finite("h", h)?;
        if h < 0.0 {
            return invalid(format!("distance must be non-negative, got {h}"));
        }
        let rho = radius.cov.correlation(h);
        Ok(RadiusPairSampler {
            radius: *radius,
            rho,
            s: (1.0 - rho * rho).max(0.0).sqrt(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let g1: f64 = rng.sample(rand_distr::StandardNormal);
        let e: f64 = rng.sample(rand_distr::StandardNormal);
        let g2 = self.rho * g1 + self.s * e;
        let d = self.radius.width();
        (
            self.radius.r_lower + d * norm_cdf(g1),
            self.radius.r_lower + d * norm_cdf(g2),
        )
    }
}

/// Area vectors induced by two random disks at distance `h`.
pub struct DiskAreaSampler<R: Rng> {
    pair: RadiusPairSampler,
    h: f64,
    rng: R,
}

impl<R: Rng> DiskAreaSampler<R> {
    pub fn new(radius: &RadiusSpec, h: f64, rng: R) -> Result<Self> {
        Ok(DiskAreaSampler {
            pair: RadiusPairSampler::new(radius, h)?,
            h,
            rng,
        })
    }
}

impl<R: Rng> AreaSampler for DiskAreaSampler<R> {
    fn next_sample(&mut self) -> Option<AreaVectorSample> {
        let (r1, r2) = self.pair.sample(&mut self.rng);
        Some(AreaVectorSample::disks(r1, r2, self.h))
    }
}

fn draw_areas<S: AreaSampler + ?Sized>(
    sampler: &mut S,
    n_mc: usize,
) -> Result<Vec<AreaVectorSample>> {
    if n_mc < 10_000 {
        return invalid(format!(
            "at least 10000 Monte Carlo samples are required, got {n_mc}"
        ));
    }
    let mut out = Vec::with_capacity(n_mc);
    for i in 0..n_mc {
        match sampler.next_sample() {
            Some(s) => out.push(s),
            None => {
                return Err(Error::InsufficientPairs(format!(
                    "area sampler exhausted after {i} of {n_mc} samples"
                )))
            }
        }
    }
    Ok(out)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

fn mean_se(v: &[f64]) -> McEstimate {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    McEstimate {
        value: m,
        std_error: (var / n).sqrt(),
    }
}

/// Joint distribution function `E exp[-x1 h1/z1 - x2 h2/z2 - x12 max(h1/z1, h2/z2)]`
/// with `h_i = h_fn(x_i + x12)`.
pub fn generic_bivariate_cdf<S, H>(
    z1: f64,
    z2: f64,
    h_fn: H,
    sampler: &mut S,
    n_mc: usize,
) -> Result<McEstimate>
where
    S: AreaSampler + ?Sized,
    H: Fn(f64) -> f64,
{
    if !(z1 > 0.0 && z2 > 0.0) {
        return invalid(format!("arguments must be positive, got ({z1}, {z2})"));
    }
    let areas = draw_areas(sampler, n_mc)?;
    let vals: Vec<f64> = areas
        .iter()
        .map(|a| {
            let h1 = h_fn(a.a1 + a.a12);
            let h2 = h_fn(a.a2 + a.a12);
            (-a.a1 * h1 / z1 - a.a2 * h2 / z2 - a.a12 * (h1 / z1).max(h2 / z2)).exp()
        })
        .collect();
    Ok(mean_se(&vals))
}

/// Stable tail-dependence function of the generic process, with the normalising
/// integrals estimated from the same sample. The standard error treats the
/// normalisers as fixed.
pub fn generic_stdf<S, H>(
    w1: f64,
    w2: f64,
    h_fn: H,
    sampler: &mut S,
    n_mc: usize,
) -> Result<McEstimate>
where
    S: AreaSampler + ?Sized,
    H: Fn(f64) -> f64,
{
    if !(w1 > 0.0 && w2 > 0.0) {
        return invalid(format!("arguments must be positive, got ({w1}, {w2})"));
    }
    let areas = draw_areas(sampler, n_mc)?;
    let hs: Vec<(f64, f64)> = areas
        .iter()
        .map(|a| (h_fn(a.a1 + a.a12), h_fn(a.a2 + a.a12)))
        .collect();
    let n = areas.len() as f64;
    let n1 = areas
        .iter()
        .zip(&hs)
        .map(|(a, h)| (a.a1 + a.a12) * h.0)
        .sum::<f64>()
        / n;
    let n2 = areas
        .iter()
        .zip(&hs)
        .map(|(a, h)| (a.a2 + a.a12) * h.1)
        .sum::<f64>()
        / n;
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(Error::Numeric(
            "normalising integral of the stable tail-dependence function is zero".into(),
        ));
    }
    let vals: Vec<f64> = areas
        .iter()
        .zip(&hs)
        .map(|(a, h)| {
            w1 * a.a1 * h.0 / n1 + w2 * a.a2 * h.1 / n2 + a.a12 * (w1 * h.0 / n1).max(w2 * h.1 / n2)
        })
        .collect();
    Ok(mean_se(&vals))
}

/// Exact draws of `(Z(s1), Z(s2))` at distance `h`: the sup-measure over the two
/// exclusive parts and the overlap are independent Fréchet variables.
pub fn sample_pair_z(radius: &RadiusSpec, h: f64, n: usize, seed: u64) -> Result<Vec<[f64; 2]>> {
    let pair = RadiusPairSampler::new(radius, h)?;
    let chunk = 4096;
    let out: Vec<Vec<[f64; 2]>> = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let m = chunk.min(n - c * chunk);
            (0..m)
                .map(|_| {
                    let (r1, r2) = pair.sample(&mut rng);
                    pair_from_radii(r1, r2, h, &mut rng)
                })
                .collect()
        })
        .collect();
    Ok(out.concat())
}

fn pair_from_radii<R: Rng + ?Sized>(r1: f64, r2: f64, h: f64, rng: &mut R) -> [f64; 2] {
    let a = AreaVectorSample::disks(r1, r2, h);
    let m1 = a.a1 * unit_frechet(rng);
    let m2 = a.a2 * unit_frechet(rng);
    let m12 = a.a12 * unit_frechet(rng);
    [m1.max(m12) / (PI * r1 * r1), m2.max(m12) / (PI * r2 * r2)]
}

/// Exact draws of the max-mixture pair at distance `h`.
pub fn sample_pair_mixture(
    params: &MixtureParams,
    h: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<[f64; 2]>> {
    params.validate()?;
    let pair = RadiusPairSampler::new(&params.radius, h)?;
    let sites = SiteSet::new(vec![[0.0, 0.0], [h, 0.0]])?;
    let companion = CompanionSampler::new(&sites, &params.companion)?;
    let q = params.q;
    let chunk = 4096;
    let out: Vec<Vec<[f64; 2]>> = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let m = chunk.min(n - c * chunk);
            (0..m)
                .map(|_| {
                    let (r1, r2) = pair.sample(&mut rng);
                    let z = pair_from_radii(r1, r2, h, &mut rng);
                    if q >= 1.0 {
                        return z;
                    }
                    let y = companion.sample(&mut rng);
                    [
                        (q * z[0]).max((1.0 - q) * y[0]),
                        (q * z[1]).max((1.0 - q) * y[1]),
                    ]
                })
                .collect()
        })
        .collect();
    Ok(out.concat())
}

/// Writes realisations as `replicate,site,x,y,value` rows.
pub fn write_realizations<W: Write>(out: W, sites: &SiteSet, values: &DMatrix<f64>) -> Result<()> {
    if values.ncols() != sites.len() {
        return Err(Error::Dimension(format!(
            "{} columns for {} sites",
            values.ncols(),
            sites.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replicate", "site", "x", "y", "value"])?;
    for i in 0..values.nrows() {
        for j in 0..values.ncols() {
            let c = sites.coords[j];
            w.write_record([
                i.to_string(),
                sites.ids[j].clone(),
                c[0].to_string(),
                c[1].to_string(),
                values[(i, j)].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes one replicate of the raster sup-measure as a flat `ix,iy,x,y,value` grid.
pub fn write_raster<W: Write>(out: W, grid: &RasterGrid, seed: u64, replicate: u64) -> Result<()> {
    let key = replicate_key(seed, replicate);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ix", "iy", "x", "y", "value"])?;
    let area = grid.side * grid.side;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let v = area * frechet_from_bits(cell_bits(key, ix, iy));
            let x = grid.origin[0] + (ix as f64 + 0.5) * grid.side;
            let y = grid.origin[1] + (iy as f64 + 0.5) * grid.side;
            w.write_record([
                ix.to_string(),
                iy.to_string(),
                x.to_string(),
                y.to_string(),
                v.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomfields::{CompanionSpec, CovarianceSpec};

    fn radius() -> RadiusSpec {
        RadiusSpec::new(0.1, 0.4, CovarianceSpec::exponential(1.0)).unwrap()
    }

    fn ks_frechet(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        v.iter()
            .enumerate()
            .map(|(i, &z)| {
                let f = (-1.0 / z).exp();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn raster_margins_are_frechet() {
        let sites = SiteSet::new(vec![[0.5, 0.5]]).unwrap();
        let grid = RasterGrid::default_for(&sites, &radius()).unwrap();
        let sim = DiskSimulator::new(&sites, &radius(), &grid).unwrap();
        let z = sim.draw_many(7, 20_000).unwrap();
        assert!(ks_frechet(z.column(0).iter().copied().collect()) < 0.015);
    }

    #[test]
    fn coincident_and_distant_sites() {
        let sites = SiteSet::new(vec![[0.2, 0.2], [0.2, 0.2], [1.5, 0.2]]).unwrap();
        let grid = RasterGrid::default_for(&sites, &radius()).unwrap();
        let sim = DiskSimulator::new(&sites, &radius(), &grid).unwrap();
        let z = sim.draw_many(3, 200).unwrap();
        for i in 0..200 {
            assert_eq!(z[(i, 0)], z[(i, 1)]);
        }
        assert_eq!(sim.draw(3, 5).unwrap(), sim.draw(3, 5).unwrap());
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let sites = SiteSet::new(vec![[0.0, 0.0]]).unwrap();
        let grid = RasterGrid::covering(&sites, 0.4, 0.05).unwrap();
        assert!(matches!(
            DiskSimulator::new(&sites, &radius(), &grid),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn mixture_with_q_one_is_disk() {
        let sites = SiteSet::new(vec![[0.0, 0.0], [0.1, 0.0]]).unwrap();
        let grid = RasterGrid::default_for(&sites, &radius()).unwrap();
        let p = MixtureParams {
            radius: radius(),
            q: 1.0,
            companion: CompanionSpec::Gaussian {
                cov: CovarianceSpec::exponential(0.5),
            },
        };
        let a = MixtureSimulator::new(&sites, &p, &grid)
            .unwrap()
            .draw(9, 4)
            .unwrap();
        let b = DiskSimulator::new(&sites, &radius(), &grid)
            .unwrap()
            .draw(9, 4)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_area_samplers() {
        let (z1, z2) = (0.7, 2.5);
        let mut comon = FixedAreas(AreaVectorSample::new(0.0, 0.0, 1.0).unwrap());
        let c = generic_bivariate_cdf(z1, z2, |_| 1.0, &mut comon, 10_000).unwrap();
        assert!((c.value - (-(1.0f64 / z1).max(1.0 / z2)).exp()).abs() < 1e-12);
        let mut indep = FixedAreas(AreaVectorSample::new(1.0, 1.0, 0.0).unwrap());
        let c = generic_bivariate_cdf(z1, z2, |_| 1.0, &mut indep, 10_000).unwrap();
        assert!((c.value - (-1.0 / z1 - 1.0 / z2).exp()).abs() < 1e-12);
        let l = generic_stdf(0.3, 0.8, |_| 1.0, &mut indep, 10_000).unwrap();
        assert!((l.value - 1.1).abs() < 1e-12);
        let l = generic_stdf(0.3, 0.8, |_| 1.0, &mut comon, 10_000).unwrap();
        assert!((l.value - 0.8).abs() < 1e-12);
        let mut short = ListedAreas::new(vec![AreaVectorSample::new(1.0, 1.0, 0.0).unwrap(); 10]);
        assert!(generic_bivariate_cdf(1.0, 1.0, |_| 1.0, &mut short, 10_000).is_err());
        assert!(generic_bivariate_cdf(1.0, 1.0, |_| 1.0, &mut indep, 100).is_err());
    }

    #[test]
    fn exact_pair_margins() {
        let z = sample_pair_z(&radius(), 0.2, 50_000, 11).unwrap();
        assert!(ks_frechet(z.iter().map(|p| p[0]).collect()) < 0.01);
        assert!(ks_frechet(z.iter().map(|p| p[1]).collect()) < 0.01);
    }
}
