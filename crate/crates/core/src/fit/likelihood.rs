//! Weighted pairwise log-likelihood over all site pairs.
//!
//! Pseudo-observations usually take few distinct values (ranks over `n + 1`), so every
//! marginal quantity that depends only on `u` and the parameters is computed once per
//! distinct value and shared by all pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::mixture::{combine, CompanionMargin};
use crate::copula::{
    CompanionPair, CopulaPoint, DiskCopula, DiskKernel, MixtureMarginal, MixtureParams, ModelParams,
};
use crate::error::{invalid, Error, Result};
use crate::measures::PseudoObservations;
use crate::numerics::dist::{gaussian_copula_ln_density, t_copula_ln_density, t_quantile};
use crate::numerics::norm_quantile;
use crate::randomfields::{RadiusSpec, SiteSet};

/// Densities are floored here before the logarithm.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Indicator weights `w = value` for pairs closer than `d_max`, zero otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairWeightRule {
    pub d_max: f64,
    #[serde(default = "one")]
    pub value: f64,
}

fn one() -> f64 {
    1.0
}

impl PairWeightRule {
    pub fn new(d_max: f64) -> Result<Self> {
        if !(d_max > 0.0) {
            return invalid(format!("cutoff distance must be positive, got {d_max}"));
        }
        Ok(PairWeightRule { d_max, value: 1.0 })
    }

    pub fn weight(&self, h: f64) -> f64 {
        if h < self.d_max {
            self.value
        } else {
            0.0
        }
    }
}

/// Indicator weights with cutoff `d_max`.
pub fn default_weights(d_max: f64) -> Result<PairWeightRule> {
    PairWeightRule::new(d_max)
}

/// How disk-copula densities are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairQuadrature {
    /// Moment-based evaluator with the given panel orders.
    Kernel { outer: usize, inner: usize },
    /// Direct Gauss-Legendre quadrature of the given order.
    Exact { order: usize },
}

impl Default for PairQuadrature {
    fn default() -> Self {
        PairQuadrature::Kernel {
            outer: 12,
            inner: 16,
        }
    }
}

enum DiskEval {
    Kernel(DiskKernel),
    Exact(DiskCopula),
}

impl DiskEval {
    fn new(spec: &RadiusSpec, h: f64, rule: PairQuadrature) -> Result<Self> {
        Ok(match rule {
            PairQuadrature::Kernel { outer, inner } => {
                DiskEval::Kernel(DiskKernel::with_orders(spec, h, outer, inner)?)
            }
            PairQuadrature::Exact { order } => DiskEval::Exact(DiskCopula::new(spec, h, order)?),
        })
    }

    fn eval(&self, u1: f64, u2: f64) -> Result<CopulaPoint> {
        match self {
            DiskEval::Kernel(k) => k.eval(u1, u2),
            DiskEval::Exact(c) => c.eval(u1, u2),
        }
    }
}

/// A site pair with positive weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPair {
    pub j1: usize,
    pub j2: usize,
    pub distance: f64,
    pub weight: f64,
}

/// Data prepared once for repeated likelihood evaluation.
#[derive(Debug, Clone)]
pub struct LikelihoodData {
    n: usize,
    levels: Vec<f64>,
    /// Column-major level index of every observation.
    index: Vec<u32>,
    pairs: Vec<WeightedPair>,
    site_ids: Vec<String>,
    /// Standard normal scores of the levels.
    normal: Vec<f64>,
}

impl LikelihoodData {
    pub fn new(u: &PseudoObservations, sites: &SiteSet, weights: &PairWeightRule) -> Result<Self> {
        let (n, p) = u.values.shape();
        if sites.len() != p {
            return Err(Error::Dimension(format!(
                "{} sites for {p} columns",
                sites.len()
            )));
        }
        let mut levels: Vec<f64> = u.values.iter().copied().collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let index = u
            .values
            .iter()
            .map(|v| levels.partition_point(|l| l < v) as u32)
            .collect();
        let mut pairs = Vec::new();
        for j1 in 0..p {
            for j2 in j1 + 1..p {
                let h = sites.distance(j1, j2);
                let w = weights.weight(h);
                if w > 0.0 {
                    pairs.push(WeightedPair {
                        j1,
                        j2,
                        distance: h,
                        weight: w,
                    });
                }
            }
        }
        if pairs.is_empty() {
            return Err(Error::InsufficientPairs(format!(
                "no pair of sites is closer than {}",
                weights.d_max
            )));
        }
        let normal = levels.iter().map(|&l| norm_quantile(l)).collect();
        Ok(LikelihoodData {
            n,
            levels,
            index,
            pairs,
            site_ids: u.site_ids.clone(),
            normal,
        })
    }

    pub fn pairs(&self) -> &[WeightedPair] {
        &self.pairs
    }

    pub fn observations(&self) -> usize {
        self.n
    }

    fn column(&self, j: usize) -> &[u32] {
        &self.index[j * self.n..(j + 1) * self.n]
    }

    fn pair_name(&self, pair: &WeightedPair) -> String {
        format!("({}, {})", self.site_ids[pair.j1], self.site_ids[pair.j2])
    }

    /// Weighted log-likelihood contribution of every pair, in pair order.
    pub fn contributions(&self, params: &ModelParams, rule: PairQuadrature) -> Result<Vec<f64>> {
        params.validate()?;
        let margins = Margins::new(self, params)?;
        self.pairs
            .par_iter()
            .map(|pair| self.pair_loglik(pair, params, &margins, rule))
            .collect()
    }

    /// Sum of the contributions, reduced in pair order.
    pub fn loglik(&self, params: &ModelParams, rule: PairQuadrature) -> Result<f64> {
        Ok(self.contributions(params, rule)?.iter().sum())
    }

    fn pair_loglik(
        &self,
        pair: &WeightedPair,
        params: &ModelParams,
        margins: &Margins,
        rule: PairQuadrature,
    ) -> Result<f64> {
        let (c1, c2) = (self.column(pair.j1), self.column(pair.j2));
        let h = pair.distance;
        let density: Box<dyn Fn(usize, usize) -> Result<f64> + '_> = match (params, margins) {
            (ModelParams::M1 { cov }, _) => {
                let rho = reference_rho(cov.correlation(h), h)?;
                Box::new(move |a, b| {
                    Ok(gaussian_copula_ln_density(self.normal[a], self.normal[b], rho).exp())
                })
            }
            (ModelParams::M2 { cov, nu }, Margins::Student(t)) => {
                let rho = reference_rho(cov.correlation(h), h)?;
                let nu = *nu;
                Box::new(move |a, b| Ok(t_copula_ln_density(t[a], t[b], rho, nu).exp()))
            }
            (ModelParams::M3 { radius }, _) => {
                let disk = DiskEval::new(radius, h, rule)?;
                Box::new(move |a, b| {
                    disk.eval(self.levels[a], self.levels[b])?
                        .pdf
                        .ok_or_else(|| no_density(h))
                })
            }
            (ModelParams::M4(m) | ModelParams::M5(m), Margins::Mixture(mm)) => {
                let disk = DiskEval::new(&m.radius, h, rule)?;
                let cp = CompanionPair::new(&m.companion, h)?;
                let q = m.q;
                Box::new(move |a, b| {
                    let (x, y) = (&mm[a], &mm[b]);
                    let zp = disk.eval(x.v, y.v)?;
                    let yv = cp.eval(&x.m, &y.m)?;
                    combine(q, [x.z, y.z], [x.f, y.f], &zp, &yv)?
                        .pdf
                        .ok_or_else(|| no_density(h))
                })
            }
            (ModelParams::M4(m) | ModelParams::M5(m), Margins::PureDisk) => {
                let disk = DiskEval::new(&m.radius, h, rule)?;
                Box::new(move |a, b| {
                    disk.eval(self.levels[a], self.levels[b])?
                        .pdf
                        .ok_or_else(|| no_density(h))
                })
            }
            _ => unreachable!("margins are built for the same family"),
        };
        let mut sum = 0.0;
        for (i, (&a, &b)) in c1.iter().zip(c2).enumerate() {
            let c = density(a as usize, b as usize)?;
            if !c.is_finite() {
                return Err(Error::Numeric(format!(
                    "density {c} for pair {} at observation {i}",
                    self.pair_name(pair)
                )));
            }
            sum += c.max(DENSITY_FLOOR).ln();
        }
        Ok(pair.weight * sum)
    }
}

fn reference_rho(rho: f64, h: f64) -> Result<f64> {
    if rho >= 1.0 - 1e-12 {
        return Err(no_density(h));
    }
    Ok(rho)
}

fn no_density(h: f64) -> Error {
    Error::NoDensity(format!("pair copula at distance {h} has no density"))
}

/// Marginal quantities of one level under the max-mixture.
#[derive(Debug, Clone, Copy)]
struct MixtureLevel {
    z: f64,
    f: f64,
    /// `exp(-q/z)`, the argument of the disk copula.
    v: f64,
    m: CompanionMargin,
}

enum Margins {
    None,
    Student(Vec<f64>),
    PureDisk,
    Mixture(Vec<MixtureLevel>),
}

impl Margins {
    fn new(data: &LikelihoodData, params: &ModelParams) -> Result<Self> {
        match params {
            ModelParams::M1 { .. } | ModelParams::M3 { .. } => Ok(Margins::None),
            ModelParams::M2 { nu, .. } => Ok(Margins::Student(
                data.levels.iter().map(|&l| t_quantile(l, *nu)).collect(),
            )),
            ModelParams::M4(m) | ModelParams::M5(m) => mixture_levels(&data.levels, m),
        }
    }
}

fn mixture_levels(levels: &[f64], m: &MixtureParams) -> Result<Margins> {
    let marginal = MixtureMarginal::new(m.q, m.companion)?;
    if m.q >= 1.0 {
        return Ok(Margins::PureDisk);
    }
    let q = m.q;
    let clamp = |v: f64| v.clamp(1e-12, 1.0 - 1e-12);
    let out: Result<Vec<MixtureLevel>> = levels
        .par_iter()
        .map(|&u| {
            let z = marginal.inv(clamp(u))?;
            Ok(MixtureLevel {
                z,
                f: marginal.pdf(z),
                v: clamp((-q / z).exp()),
                m: CompanionPair::margin(&m.companion, z / (1.0 - q)),
            })
        })
        .collect();
    Ok(Margins::Mixture(out?))
}

/// Weighted pairwise log-likelihood of `params` on pseudo-observations `u`.
pub fn pairwise_loglik(
    u: &PseudoObservations,
    sites: &SiteSet,
    params: &ModelParams,
    weights: &PairWeightRule,
    rule: PairQuadrature,
) -> Result<f64> {
    LikelihoodData::new(u, sites, weights)?.loglik(params, rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{MixtureCopula, PairCopula};
    use crate::measures::rank_transform;
    use crate::randomfields::{stream_rng, CompanionSpec, CovarianceSpec};
    use nalgebra::DMatrix;
    use rand::Rng;

    fn uniform_obs(n: usize, p: usize, seed: u64) -> PseudoObservations {
        let mut rng = stream_rng(seed, 0);
        let data = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>());
        rank_transform(&data, (0..p).map(|j| format!("s{j}")).collect()).unwrap()
    }

    fn mixture(q: f64) -> MixtureParams {
        MixtureParams {
            radius: RadiusSpec::new(0.0, 0.4, CovarianceSpec::exponential(0.25)).unwrap(),
            q,
            companion: CompanionSpec::Gaussian {
                cov: CovarianceSpec::exponential(0.5),
            },
        }
    }

    #[test]
    fn independence_and_linearity() {
        let u = uniform_obs(40, 2, 1);
        let sites = SiteSet::new(vec![[0.0, 0.0], [0.9, 0.0]]).unwrap();
        let w = default_weights(1.0).unwrap();
        // disks of radius <= 0.4 never meet at distance 0.9
        let p = ModelParams::M3 {
            radius: RadiusSpec::new(0.0, 0.4, CovarianceSpec::exponential(0.25)).unwrap(),
        };
        let ll = pairwise_loglik(&u, &sites, &p, &w, PairQuadrature::default()).unwrap();
        assert_eq!(ll, 0.0);
        let sites = SiteSet::new(vec![[0.0, 0.0], [0.1, 0.0]]).unwrap();
        let one = pairwise_loglik(&u, &sites, &p, &w, PairQuadrature::default()).unwrap();
        let w2 = PairWeightRule {
            d_max: 1.0,
            value: 2.0,
        };
        let two = pairwise_loglik(&u, &sites, &p, &w2, PairQuadrature::default()).unwrap();
        assert_eq!(two, 2.0 * one);
        let far = default_weights(0.05).unwrap();
        assert!(matches!(
            pairwise_loglik(&u, &sites, &p, &far, PairQuadrature::default()),
            Err(Error::InsufficientPairs(_))
        ));
    }

    #[test]
    fn matches_pair_copula_densities() {
        let u = uniform_obs(30, 3, 2);
        let sites = SiteSet::new(vec![[0.0, 0.0], [0.1, 0.05], [0.2, 0.2]]).unwrap();
        let w = default_weights(1.0).unwrap();
        let models = [
            ModelParams::M1 {
                cov: CovarianceSpec::exponential(0.3),
            },
            ModelParams::M2 {
                cov: CovarianceSpec::exponential(0.3),
                nu: 4.0,
            },
            ModelParams::M3 {
                radius: RadiusSpec::new(0.05, 0.4, CovarianceSpec::exponential(0.25)).unwrap(),
            },
            ModelParams::M4(mixture(0.2)),
            ModelParams::M5(MixtureParams {
                companion: CompanionSpec::StudentFrechet {
                    cov: CovarianceSpec::exponential(0.5),
                    nu: 3.0,
                    beta: 1.2,
                },
                ..mixture(0.2)
            }),
        ];
        for p in models {
            let got =
                pairwise_loglik(&u, &sites, &p, &w, PairQuadrature::Exact { order: 35 }).unwrap();
            let mut expect = 0.0;
            for (j1, j2) in [(0, 1), (0, 2), (1, 2)] {
                let c = PairCopula::new(&p, sites.distance(j1, j2), 35).unwrap();
                for i in 0..u.nrows() {
                    expect += c
                        .pdf(u.values[(i, j1)], u.values[(i, j2)])
                        .unwrap()
                        .max(DENSITY_FLOOR)
                        .ln();
                }
            }
            assert!(
                (got - expect).abs() < 1e-9 * expect.abs().max(1.0),
                "{:?}: {got} vs {expect}",
                p.family()
            );
            let fast = pairwise_loglik(&u, &sites, &p, &w, PairQuadrature::default()).unwrap();
            assert!((fast - expect).abs() < 1e-3, "{:?}", p.family());
        }
    }

    #[test]
    fn pure_mixture_equals_disk() {
        let u = uniform_obs(30, 2, 3);
        let sites = SiteSet::new(vec![[0.0, 0.0], [0.15, 0.0]]).unwrap();
        let w = default_weights(1.0).unwrap();
        let m = mixture(1.0);
        let a = pairwise_loglik(
            &u,
            &sites,
            &ModelParams::M4(m),
            &w,
            PairQuadrature::default(),
        );
        let b = pairwise_loglik(
            &u,
            &sites,
            &ModelParams::M3 { radius: m.radius },
            &w,
            PairQuadrature::default(),
        );
        assert_eq!(a.unwrap(), b.unwrap());
        let c = MixtureCopula::new(&m, 0.15, 35).unwrap();
        assert!(c.pdf(0.3, 0.4).unwrap() > 0.0);
    }
}
