//! Latent Gaussian fields: covariance families, site sets, the random-radius field and
//! the companion process of the mixture model.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, domain, invalid, Error, Result};
use crate::numerics::dist::{gaussian_copula_ln_density, norm_cdf, norm_quantile, t_cdf};

/// Deterministic generator for replicate `stream` under a master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovFamily {
    Exponential,
    PoweredExponential,
}

/// Stationary isotropic correlation `exp(-(h / range)^smoothness)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub family: CovFamily,
    pub range: f64,
    pub smoothness: f64,
}

impl CovarianceSpec {
    pub fn exponential(range: f64) -> Self {
        CovarianceSpec {
            family: CovFamily::Exponential,
            range,
            smoothness: 1.0,
        }
    }

    pub fn powered(range: f64, smoothness: f64) -> Self {
        CovarianceSpec {
            family: CovFamily::PoweredExponential,
            range,
            smoothness,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("range", self.range)?;
        if self.range <= 0.0 {
            return invalid(format!("range must be positive, got {}", self.range));
        }
        let a = self.alpha();
        if !(a > 0.0 && a <= 2.0) {
            return invalid(format!("smoothness must lie in (0, 2], got {a}"));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        match self.family {
            CovFamily::Exponential => 1.0,
            CovFamily::PoweredExponential => self.smoothness,
        }
    }

    pub fn correlation(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 1.0;
        }
        let x = h / self.range;
        match self.family {
            CovFamily::Exponential => (-x).exp(),
            CovFamily::PoweredExponential => (-x.powf(self.smoothness)).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    /// Coordinates are `(latitude, longitude)` in degrees; distances in kilometres.
    GreatCircleKm,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "euclidean" => Ok(Metric::Euclidean),
            "great_circle_km" | "great-circle-km" => Ok(Metric::GreatCircleKm),
            _ => invalid(format!(
                "metric must be euclidean or great_circle_km, got '{s}'"
            )),
        }
    }
}

const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Ordered station locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSet {
    pub ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    #[serde(default)]
    pub metric: Metric,
}

impl SiteSet {
    pub fn new(coords: Vec<[f64; 2]>) -> Result<Self> {
        let ids = (0..coords.len()).map(|i| format!("s{i}")).collect();
        Self::with_ids(ids, coords, Metric::Euclidean)
    }

    pub fn with_ids(ids: Vec<String>, coords: Vec<[f64; 2]>, metric: Metric) -> Result<Self> {
        if ids.len() != coords.len() {
            return Err(Error::Dimension(format!(
                "{} ids for {} coordinates",
                ids.len(),
                coords.len()
            )));
        }
        for c in &coords {
            if !(c[0].is_finite() && c[1].is_finite()) {
                return invalid(format!("non-finite site coordinate {c:?}"));
            }
            if metric == Metric::GreatCircleKm && (c[0].abs() > 90.0 || c[1].abs() > 360.0) {
                return invalid(format!("latitude/longitude out of range: {c:?}"));
            }
        }
        Ok(SiteSet {
            ids,
            coords,
            metric,
        })
    }

    /// `count` sites uniform on `[x0, x1] x [y0, y1]`.
    pub fn uniform<R: Rng + ?Sized>(count: usize, domain: [f64; 4], rng: &mut R) -> Result<Self> {
        let [x0, x1, y0, y1] = domain;
        if !(x1 > x0 && y1 > y0) {
            return invalid("empty site domain");
        }
        let coords = (0..count)
            .map(|_| {
                [
                    x0 + (x1 - x0) * rng.random::<f64>(),
                    y0 + (y1 - y0) * rng.random::<f64>(),
                ]
            })
            .collect();
        Self::new(coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords[i], self.coords[j]);
        match self.metric {
            Metric::Euclidean => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
            Metric::GreatCircleKm => haversine_km(a, b),
        }
    }

    pub fn distance_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { self.distance(i, j) })
    }

    /// Planar copy: great-circle sites are projected equirectangularly about their
    /// centroid, in kilometres.
    pub fn planar(&self) -> SiteSet {
        match self.metric {
            Metric::Euclidean => self.clone(),
            Metric::GreatCircleKm => {
                let n = self.len().max(1) as f64;
                let lat0 = self.coords.iter().map(|c| c[0]).sum::<f64>() / n;
                let lon0 = self.coords.iter().map(|c| c[1]).sum::<f64>() / n;
                let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
                let coords = self
                    .coords
                    .iter()
                    .map(|c| {
                        [
                            (c[1] - lon0) * k * lat0.to_radians().cos(),
                            (c[0] - lat0) * k,
                        ]
                    })
                    .collect();
                SiteSet {
                    ids: self.ids.clone(),
                    coords,
                    metric: Metric::Euclidean,
                }
            }
        }
    }

    pub fn subset(&self, idx: &[usize]) -> SiteSet {
        SiteSet {
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            coords: idx.iter().map(|&i| self.coords[i]).collect(),
            metric: self.metric,
        }
    }

    /// Unique locations and, per site, the index of its location.
    fn dedup(&self) -> (Vec<[f64; 2]>, Vec<usize>) {
        let mut uniq: Vec<[f64; 2]> = Vec::new();
        let mut map = Vec::with_capacity(self.len());
        for c in &self.coords {
            match uniq.iter().position(|u| u == c) {
                Some(k) => map.push(k),
                None => {
                    map.push(uniq.len());
                    uniq.push(*c);
                }
            }
        }
        (uniq, map)
    }
}

pub fn haversine_km(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (la1, lo1, la2, lo2) = (
        a[0].to_radians(),
        a[1].to_radians(),
        b[0].to_radians(),
        b[1].to_radians(),
    );
    let s = ((la2 - la1) / 2.0).sin().powi(2)
        + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * s.sqrt().min(1.0).asin()
}

/// Reusable sampler of a unit-variance Gaussian field at fixed sites.
#[derive(Debug, Clone)]
pub struct GpSampler {
    chol: DMatrix<f64>,
    map: Vec<usize>,
}

impl GpSampler {
    pub fn new(sites: &SiteSet, cov: &CovarianceSpec) -> Result<Self> {
        cov.validate()?;
        let (uniq, map) = sites.dedup();
        let m = uniq.len();
        let tmp = SiteSet {
            ids: vec![String::new(); m],
            coords: uniq,
            metric: sites.metric,
        };
        let sigma = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                1.0
            } else {
                cov.correlation(tmp.distance(i, j))
            }
        });
        let mut nugget = 0.0;
        loop {
            let mut s = sigma.clone();
            for i in 0..m {
                s[(i, i)] += nugget;
            }
            if let Some(ch) = s.cholesky() {
                return Ok(GpSampler { chol: ch.l(), map });
            }
            nugget = if nugget == 0.0 { 1e-12 } else { nugget * 10.0 };
            if nugget > 1e-8 {
                return Err(Error::IllConditioned(format!(
                    "correlation matrix of {m} sites not positive definite with nugget up to 1e-8"
                )));
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.chol.nrows();
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &self.chol * z;
        self.map.iter().map(|&k| x[k]).collect()
    }
}

/// Draw of a unit-variance Gaussian field at the sites.
pub fn sample_gp<R: Rng + ?Sized>(
    sites: &SiteSet,
    cov: &CovarianceSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(GpSampler::new(sites, cov)?.sample(rng))
}

/// Random radius field `R(s) = r_lower + (r_upper - r_lower) Phi(X(s))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSpec {
    pub r_lower: f64,
    pub r_upper: f64,
    pub cov: CovarianceSpec,
}

impl RadiusSpec {
    pub fn new(r_lower: f64, r_upper: f64, cov: CovarianceSpec) -> Result<Self> {
        let s = RadiusSpec {
            r_lower,
            r_upper,
            cov,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("r_lower", self.r_lower)?;
        check_finite("r_upper", self.r_upper)?;
        if !(self.r_lower >= 0.0 && self.r_upper > 0.0 && self.r_lower <= self.r_upper) {
            return invalid(format!(
                "need 0 <= r_lower <= r_upper, r_upper > 0; got ({}, {})",
                self.r_lower, self.r_upper
            ));
        }
        self.cov.validate()
    }

    pub fn width(&self) -> f64 {
        self.r_upper - self.r_lower
    }

    pub fn radius_from_score(&self, x: f64) -> f64 {
        (self.r_lower + self.width() * norm_cdf(x)).clamp(self.r_lower, self.r_upper)
    }

    pub fn score_from_radius(&self, r: f64) -> f64 {
        norm_quantile((r - self.r_lower) / self.width())
    }
}

pub fn sample_radius<R: Rng + ?Sized>(
    sites: &SiteSet,
    spec: &RadiusSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let x = sample_gp(sites, &spec.cov, rng)?;
    Ok(x.into_iter().map(|v| spec.radius_from_score(v)).collect())
}

/// Joint density of the radii at two sites `h` apart.
pub fn radius_pair_density(r1: f64, r2: f64, h: f64, spec: &RadiusSpec) -> Result<f64> {
    spec.validate()?;
    let d = spec.width();
    if d == 0.0 {
        return domain("degenerate radius distribution has no density");
    }
    let inside = |r: f64| r > spec.r_lower && r < spec.r_upper;
    if !(inside(r1) && inside(r2)) {
        return Ok(0.0);
    }
    let rho = spec.cov.correlation(h);
    if rho >= 1.0 - 1e-12 {
        return domain("coincident sites: radius pair has no joint density");
    }
    let (x1, x2) = (spec.score_from_radius(r1), spec.score_from_radius(r2));
    Ok(gaussian_copula_ln_density(x1, x2, rho).exp() / (d * d))
}

/// Companion process of the mixture model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompanionSpec {
    /// Gaussian process with standard normal margins.
    Gaussian { cov: CovarianceSpec },
    /// Student-t process with `nu` degrees of freedom, transformed to Fréchet margins
    /// `exp(-z^(-beta))`.
    StudentFrechet {
        cov: CovarianceSpec,
        nu: f64,
        beta: f64,
    },
}

impl CompanionSpec {
    pub fn cov(&self) -> &CovarianceSpec {
        match self {
            CompanionSpec::Gaussian { cov } | CompanionSpec::StudentFrechet { cov, .. } => cov,
        }
    }

    pub fn cov_mut(&mut self) -> &mut CovarianceSpec {
        match self {
            CompanionSpec::Gaussian { cov } | CompanionSpec::StudentFrechet { cov, .. } => cov,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cov().validate()?;
        if let CompanionSpec::StudentFrechet { nu, beta, .. } = *self {
            if !(nu > 0.0 && nu.is_finite()) {
                return invalid(format!("degrees of freedom must be positive, got {nu}"));
            }
            if !(beta > 0.0 && beta.is_finite()) {
                return invalid(format!("Frechet shape must be positive, got {beta}"));
            }
        }
        Ok(())
    }

    /// Marginal distribution function.
    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            CompanionSpec::Gaussian { .. } => norm_cdf(y),
            CompanionSpec::StudentFrechet { beta, .. } => {
                if y <= 0.0 {
                    0.0
                } else {
                    (-y.powf(-beta)).exp()
                }
            }
        }
    }

    /// Marginal density.
    pub fn pdf(&self, y: f64) -> f64 {
        match *self {
            CompanionSpec::Gaussian { .. } => crate::numerics::norm_pdf(y),
            CompanionSpec::StudentFrechet { beta, .. } => {
                if y <= 0.0 {
                    0.0
                } else {
                    let p = y.powf(-beta);
                    beta * p / y * (-p).exp()
                }
            }
        }
    }

    /// Smallest value of the support.
    pub fn support_lower(&self) -> f64 {
        match self {
            CompanionSpec::Gaussian { .. } => f64::NEG_INFINITY,
            CompanionSpec::StudentFrechet { .. } => 0.0,
        }
    }
}

/// Reusable companion-process sampler.
#[derive(Debug, Clone)]
pub struct CompanionSampler {
    spec: CompanionSpec,
    gp: GpSampler,
    chi: Option<ChiSquared<f64>>,
}

impl CompanionSampler {
    pub fn new(sites: &SiteSet, spec: &CompanionSpec) -> Result<Self> {
        spec.validate()?;
        let gp = GpSampler::new(sites, spec.cov())?;
        let chi = match *spec {
            CompanionSpec::StudentFrechet { nu, .. } => Some(
                ChiSquared::new(nu).map_err(|e| Error::InvalidInput(format!("chi-square: {e}")))?,
            ),
            CompanionSpec::Gaussian { .. } => None,
        };
        Ok(CompanionSampler {
            spec: *spec,
            gp,
            chi,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let x = self.gp.sample(rng);
        match (self.spec, &self.chi) {
            (CompanionSpec::StudentFrechet { nu, beta, .. }, Some(chi)) => {
                let w = (chi.sample(rng) / nu).sqrt();
                x.into_iter()
                    .map(|v| frechet_from_t(v / w, nu, beta))
                    .collect()
            }
            _ => x,
        }
    }
}

/// Maps a t score to Fréchet(`beta`) via its probability integral transform.
pub fn frechet_from_t(t: f64, nu: f64, beta: f64) -> f64 {
    // -ln p from the upper tail keeps precision when p is close to 1
    let upper = t_cdf(-t, nu);
    let e = if upper < 0.5 {
        -(-upper).ln_1p()
    } else {
        -t_cdf(t, nu).ln()
    };
    e.max(1e-300).powf(-1.0 / beta)
}

pub fn sample_companion<R: Rng + ?Sized>(
    sites: &SiteSet,
    spec: &CompanionSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(CompanionSampler::new(sites, spec)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sites3() -> SiteSet {
        SiteSet::new(vec![[0.0, 0.0], [0.1, 0.0], [0.5, 0.5]]).unwrap()
    }

    #[test]
    fn correlation_families() {
        let e = CovarianceSpec::exponential(0.25);
        assert!((e.correlation(0.25) - (-1.0f64).exp()).abs() < 1e-15);
        let p = CovarianceSpec::powered(0.5, 2.0);
        assert!((p.correlation(0.5) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(p.correlation(0.0), 1.0);
        assert!(CovarianceSpec::powered(0.5, 2.5).validate().is_err());
        assert!(CovarianceSpec::exponential(0.0).validate().is_err());
    }

    #[test]
    fn gp_empirical_covariance() {
        let sites = sites3();
        let cov = CovarianceSpec::exponential(0.25);
        let s = GpSampler::new(&sites, &cov).unwrap();
        let mut rng = stream_rng(11, 0);
        let n = 200_000;
        let mut c01 = 0.0;
        let mut c02 = 0.0;
        let mut v0 = 0.0;
        for _ in 0..n {
            let x = s.sample(&mut rng);
            c01 += x[0] * x[1];
            c02 += x[0] * x[2];
            v0 += x[0] * x[0];
        }
        let nf = n as f64;
        assert!((v0 / nf - 1.0).abs() < 0.015);
        assert!((c01 / nf - cov.correlation(0.1)).abs() < 0.015);
        assert!((c02 / nf - cov.correlation(sites.distance(0, 2))).abs() < 0.015);
    }

    #[test]
    fn coincident_sites_identical() {
        let sites = SiteSet::new(vec![[0.2, 0.2], [0.2, 0.2], [0.7, 0.1]]).unwrap();
        let mut rng = stream_rng(3, 1);
        let s = GpSampler::new(&sites, &CovarianceSpec::exponential(0.3)).unwrap();
        for _ in 0..50 {
            let x = s.sample(&mut rng);
            assert_eq!(x[0], x[1]);
        }
    }

    #[test]
    fn radius_margins_uniform() {
        let spec = RadiusSpec::new(0.1, 0.4, CovarianceSpec::exponential(1.0)).unwrap();
        let sites = sites3();
        let mut rng = stream_rng(5, 0);
        let s = GpSampler::new(&sites, &spec.cov).unwrap();
        let n = 100_000;
        let mut below = 0usize;
        for _ in 0..n {
            let r = spec.radius_from_score(s.sample(&mut rng)[0]);
            assert!((0.1..=0.4).contains(&r));
            if r < 0.175 {
                below += 1;
            }
        }
        assert!((below as f64 / n as f64 - 0.25).abs() < 0.01);
        assert!(RadiusSpec::new(0.5, 0.4, spec.cov).is_err());
    }

    #[test]
    fn radius_density_integrates_to_one() {
        let spec = RadiusSpec::new(0.1, 0.4, CovarianceSpec::exponential(1.0)).unwrap();
        let rule = crate::numerics::GaussLegendre::new(80).unwrap();
        let v = crate::numerics::integrate_2d(&rule, (0.1, 0.4), (0.1, 0.4), |a, b| {
            radius_pair_density(a, b, 0.6, &spec).unwrap()
        });
        assert!((v - 1.0).abs() < 2e-3, "{v}");
    }

    #[test]
    fn ill_conditioned_detected() {
        // near-duplicate sites under a Gaussian kernel are numerically singular
        let sites = SiteSet::new(vec![[0.0, 0.0], [1e-9, 0.0], [2e-9, 0.0]]).unwrap();
        let r = GpSampler::new(&sites, &CovarianceSpec::powered(10.0, 2.0));
        assert!(matches!(r, Err(Error::IllConditioned(_))) || r.is_ok());
    }

    #[test]
    fn frechet_companion_margins() {
        let spec = CompanionSpec::StudentFrechet {
            cov: CovarianceSpec::exponential(0.5),
            nu: 3.0,
            beta: 1.2,
        };
        let sites = sites3();
        let s = CompanionSampler::new(&sites, &spec).unwrap();
        let mut rng = stream_rng(9, 0);
        let n = 100_000;
        let z = 2.0;
        let below = (0..n).filter(|_| s.sample(&mut rng)[1] <= z).count();
        assert!((below as f64 / n as f64 - spec.cdf(z)).abs() < 0.005);
    }

    #[test]
    fn great_circle_distance() {
        let s = SiteSet::with_ids(
            vec!["a".into(), "b".into()],
            vec![[35.0, -97.0], [36.0, -97.0]],
            Metric::GreatCircleKm,
        )
        .unwrap();
        assert!((s.distance(0, 1) - 111.195).abs() < 0.01);
        let p = s.planar();
        assert!((p.distance(0, 1) - 111.195).abs() < 0.01);
    }
}
