//! Weighted pairwise-likelihood estimation for the five model families.

pub mod likelihood;
pub mod params;
pub mod study;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use crate::copula::{Family, ModelParams};
use crate::error::{invalid, Error, Result};
use crate::measures::PseudoObservations;
use crate::randomfields::SiteSet;

pub use likelihood::{
    default_weights, pairwise_loglik, LikelihoodData, PairQuadrature, PairWeightRule, WeightedPair,
    DENSITY_FLOOR,
};
pub use params::{assemble, decompose, FreeParam, ParamName, Transform};

/// Simplex search controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerControls {
    pub max_iter: u64,
    /// Stop when the spread of the simplex objective values falls below this fraction
    /// of the objective magnitude.
    pub rel_tol: f64,
    /// Number of starting points, taken from midpoint, minus and plus offsets in turn.
    pub starts: usize,
}

impl Default for OptimizerControls {
    fn default() -> Self {
        OptimizerControls {
            max_iter: 500,
            rel_tol: 1e-6,
            starts: 3,
        }
    }
}

/// What to estimate and what to hold fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub family: Family,
    pub free: Vec<FreeParam>,
    pub fixed: BTreeMap<ParamName, f64>,
    #[serde(default)]
    pub controls: OptimizerControls,
    #[serde(default)]
    pub quadrature: PairQuadrature,
}

impl FitSpec {
    /// Default boxes for sites on a domain of linear size `scale`: lengths in
    /// `[0.01, 1] * scale`, smoothness fixed at 1, lower radius fixed at 0, `q` in
    /// `[0.01, 0.99]`, M2 degrees of freedom in `[1, 30]`, M5 degrees of freedom fixed
    /// at 3 and shape in `[0.2, 5]`.
    pub fn default_for(family: Family, scale: f64) -> Self {
        use ParamName::*;
        let mut free = Vec::new();
        let mut fixed = BTreeMap::new();
        for &name in ParamName::of(family) {
            match name {
                Theta | RUpper | ThetaR | ThetaY => {
                    free.push(FreeParam::new(name, 0.01 * scale, scale))
                }
                Alpha | AlphaR | AlphaY => {
                    fixed.insert(name, 1.0);
                }
                RLower => {
                    fixed.insert(name, 0.0);
                }
                Q => free.push(FreeParam::new(name, 0.01, 0.99)),
                Nu if family == Family::M2 => free.push(FreeParam::new(name, 1.0, 30.0)),
                Nu => {
                    fixed.insert(name, 3.0);
                }
                Beta => free.push(FreeParam::new(name, 0.2, 5.0)),
            }
        }
        FitSpec {
            family,
            free,
            fixed,
            controls: OptimizerControls::default(),
            quadrature: PairQuadrature::default(),
        }
    }

    /// Moves `name` from the free list to the fixed list.
    pub fn fix(mut self, name: ParamName, value: f64) -> Self {
        self.free.retain(|p| p.name != name);
        self.fixed.insert(name, value);
        self
    }

    /// Frees `name` with the given box.
    pub fn free(mut self, name: ParamName, lower: f64, upper: f64) -> Self {
        self.fixed.remove(&name);
        self.free.retain(|p| p.name != name);
        self.free.push(FreeParam::new(name, lower, upper));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let names = ParamName::of(self.family);
        for p in &self.free {
            p.validate()?;
            if !names.contains(&p.name) {
                return invalid(format!("{} is not a {} parameter", p.name, self.family));
            }
            if self.fixed.contains_key(&p.name) {
                return invalid(format!("{} is both free and fixed", p.name));
            }
        }
        for n in self.fixed.keys() {
            if !names.contains(n) {
                return invalid(format!("{n} is not a {} parameter", self.family));
            }
        }
        for n in names {
            let free = self.free.iter().filter(|p| p.name == *n).count();
            if free + usize::from(self.fixed.contains_key(n)) != 1 {
                return invalid(format!("{n} must be either free or fixed exactly once"));
            }
        }
        if self.free.is_empty() {
            return invalid("no free parameters");
        }
        if self.controls.starts == 0 || self.controls.max_iter == 0 {
            return invalid("optimizer needs at least one start and one iteration");
        }
        Ok(())
    }

    /// Parameter record for free values `v`, in the order of `free`.
    pub fn params_at(&self, v: &[f64]) -> Result<ModelParams> {
        let mut all = self.fixed.clone();
        for (p, x) in self.free.iter().zip(v) {
            all.insert(p.name, *x);
        }
        assemble(self.family, &all)
    }

    /// Starting points: box midpoint, then midpoint minus and plus half of the half-width.
    pub fn starts(&self) -> Vec<Vec<f64>> {
        let offsets = [0.0, -0.5, 0.5];
        (0..self.controls.starts)
            .map(|k| {
                let o = offsets[k % 3] * (1.0 + (k / 3) as f64 * 0.5).min(1.9);
                self.free
                    .iter()
                    .map(|p| p.midpoint() + o * p.half_width())
                    .collect()
            })
            .collect()
    }
}

/// Outcome of one starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartReport {
    pub start: BTreeMap<ParamName, f64>,
    pub estimate: BTreeMap<ParamName, f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: u64,
}

/// Log-likelihood contribution of one pair at the estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairContribution {
    pub site1: String,
    pub site2: String,
    pub distance: f64,
    pub weight: f64,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    /// Every family parameter, free and fixed.
    pub estimates: BTreeMap<ParamName, f64>,
    pub params: ModelParams,
    pub fixed: BTreeMap<ParamName, f64>,
    /// Maximised pairwise log-likelihood.
    pub objective: f64,
    pub converged: bool,
    pub iterations: u64,
    pub evaluations: usize,
    /// Evaluations that failed and were treated as infeasible.
    pub failed_evaluations: usize,
    pub starts: Vec<StartReport>,
    pub pairs: Vec<PairContribution>,
    pub weights: PairWeightRule,
    pub seed: u64,
}

impl FitResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Objective<'a> {
    data: &'a LikelihoodData,
    spec: &'a FitSpec,
    evals: AtomicUsize,
    failures: AtomicUsize,
}

impl Objective<'_> {
    fn values(&self, x: &[f64]) -> Vec<f64> {
        self.spec
            .free
            .iter()
            .zip(x)
            .map(|(p, &x)| p.from_free(x))
            .collect()
    }

    /// Negative log-likelihood; failures count as infeasible.
    fn neg_loglik(&self, x: &[f64]) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        let v = self.values(x);
        let out = self
            .spec
            .params_at(&v)
            .and_then(|p| self.data.loglik(&p, self.spec.quadrature));
        match out {
            Ok(ll) if ll.is_finite() => -ll,
            _ => {
                self.failures.fetch_add(1, Ordering::Relaxed);
                f64::INFINITY
            }
        }
    }
}

impl CostFunction for &Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.neg_loglik(x))
    }
}

/// Initial simplex around `v`: each vertex moves one coordinate by a tenth of its box,
/// inwards when the step would leave the box.
fn simplex(spec: &FitSpec, v: &[f64]) -> Vec<Vec<f64>> {
    let x0: Vec<f64> = spec
        .free
        .iter()
        .zip(v)
        .map(|(p, &v)| p.to_free(v))
        .collect();
    let mut out = vec![x0.clone()];
    for (i, p) in spec.free.iter().enumerate() {
        let step = 0.1 * (p.upper - p.lower);
        let moved = if v[i] + step < p.upper {
            v[i] + step
        } else {
            v[i] - step
        };
        let mut x = x0.clone();
        x[i] = p.to_free(moved);
        out.push(x);
    }
    out
}

fn named(spec: &FitSpec, v: &[f64]) -> BTreeMap<ParamName, f64> {
    spec.free
        .iter()
        .map(|p| p.name)
        .zip(v.iter().copied())
        .collect()
}

/// Maximises the weighted pairwise log-likelihood by Nelder-Mead in transformed
/// coordinates from each starting point and keeps the best converged run. When no run
/// converges the best run is returned with `converged = false`.
pub fn fit_model(
    u: &PseudoObservations,
    sites: &SiteSet,
    spec: &FitSpec,
    weights: &PairWeightRule,
    seed: u64,
) -> Result<FitResult> {
    spec.validate()?;
    if u.nrows() < 30 {
        return invalid(format!("fitting needs n >= 30, got {}", u.nrows()));
    }
    let data = LikelihoodData::new(u, sites, weights)?;
    fit_prepared(&data, u, spec, weights, seed)
}

/// [`fit_model`] on prepared likelihood data.
pub fn fit_prepared(
    data: &LikelihoodData,
    u: &PseudoObservations,
    spec: &FitSpec,
    weights: &PairWeightRule,
    seed: u64,
) -> Result<FitResult> {
    spec.validate()?;
    let objective = Objective {
        data,
        spec,
        evals: AtomicUsize::new(0),
        failures: AtomicUsize::new(0),
    };
    let mut reports = Vec::new();
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for start in spec.starts() {
        let f0 = objective.neg_loglik(&simplex(spec, &start)[0]);
        let tol = spec.controls.rel_tol
            * if f0.is_finite() {
                f0.abs().max(1.0)
            } else {
                1.0
            };
        let solver = NelderMead::new(simplex(spec, &start))
            .with_sd_tolerance(tol)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let res = Executor::new(&objective, solver)
            .configure(|s| s.max_iters(spec.controls.max_iter))
            .run()
            .map_err(|e| Error::Numeric(e.to_string()))?;
        let state = res.state();
        let x = state
            .get_best_param()
            .cloned()
            .unwrap_or_else(|| simplex(spec, &start)[0].clone());
        let cost = state.get_best_cost();
        let converged = matches!(
            state.get_termination_status(),
            TerminationStatus::Terminated(TerminationReason::SolverConverged)
        ) && cost.is_finite();
        let v = objective.values(&x);
        reports.push(StartReport {
            start: named(spec, &start),
            estimate: named(spec, &v),
            objective: -cost,
            converged,
            iterations: state.get_iter(),
        });
        let k = reports.len() - 1;
        let better = match &best {
            None => true,
            Some((b, _, c)) => {
                let bc = reports[*b].converged;
                (converged && !bc) || (converged == bc && cost < *c)
            }
        };
        if better {
            best = Some((k, v, cost));
        }
    }
    let (k, v, cost) = best.expect("at least one start");
    if !cost.is_finite() {
        return Err(Error::NonConvergence(
            "the objective was infeasible at every start".into(),
        ));
    }
    let params = spec.params_at(&v)?;
    let contributions = data.contributions(&params, spec.quadrature)?;
    let pairs = data
        .pairs()
        .iter()
        .zip(&contributions)
        .map(|(p, &ll)| PairContribution {
            site1: u.site_ids[p.j1].clone(),
            site2: u.site_ids[p.j2].clone(),
            distance: p.distance,
            weight: p.weight,
            loglik: ll,
        })
        .collect();
    Ok(FitResult {
        family: spec.family,
        estimates: decompose(&params),
        params,
        fixed: spec.fixed.clone(),
        objective: -cost,
        converged: reports[k].converged,
        iterations: reports.iter().map(|r| r.iterations).sum(),
        evaluations: objective.evals.load(Ordering::Relaxed),
        failed_evaluations: objective.failures.load(Ordering::Relaxed),
        starts: reports,
        pairs,
        weights: *weights,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::rank_transform;
    use crate::randomfields::{stream_rng, CovarianceSpec, GpSampler};
    use nalgebra::DMatrix;

    fn gaussian_data(theta: f64, n: usize, seed: u64) -> (PseudoObservations, SiteSet) {
        let mut rng = stream_rng(seed, 0);
        let sites = SiteSet::uniform(8, [0.0, 1.0, 0.0, 1.0], &mut rng).unwrap();
        let gp = GpSampler::new(&sites, &CovarianceSpec::exponential(theta)).unwrap();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| gp.sample(&mut rng)).collect();
        let data = DMatrix::from_fn(n, sites.len(), |i, j| rows[i][j]);
        (rank_transform(&data, sites.ids.clone()).unwrap(), sites)
    }

    #[test]
    fn spec_validation() {
        for f in Family::ALL {
            FitSpec::default_for(f, 1.0).validate().unwrap();
        }
        let s = FitSpec::default_for(Family::M3, 1.0);
        let mut dup = s.clone();
        dup.fixed.insert(ParamName::RUpper, 0.4);
        assert!(dup.validate().is_err());
        let mut missing = s.clone();
        missing.fixed.remove(&ParamName::AlphaR);
        assert!(missing.validate().is_err());
        let starts = s.starts();
        assert_eq!(starts.len(), 3);
        assert!((starts[0][0] - 0.505).abs() < 1e-12);
        assert!((starts[1][0] - 0.2575).abs() < 1e-12);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<FitSpec>(&json).unwrap(), s);
    }

    #[test]
    fn gaussian_likelihood_prefers_truth() {
        let (u, sites) = gaussian_data(0.4, 500, 11);
        let w = default_weights(2.0).unwrap();
        let ll = |theta: f64| {
            pairwise_loglik(
                &u,
                &sites,
                &ModelParams::M1 {
                    cov: CovarianceSpec::exponential(theta),
                },
                &w,
                PairQuadrature::default(),
            )
            .unwrap()
        };
        assert!(ll(0.4) > ll(0.2));
        assert!(ll(0.4) > ll(0.6));
    }

    #[test]
    fn gaussian_fit_is_deterministic() {
        let (u, sites) = gaussian_data(0.3, 300, 12);
        let w = default_weights(2.0).unwrap();
        let spec = FitSpec::default_for(Family::M1, 1.0);
        let a = fit_model(&u, &sites, &spec, &w, 7).unwrap();
        let b = fit_model(&u, &sites, &spec, &w, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.converged);
        let theta = a.estimates[&ParamName::Theta];
        assert!((theta - 0.3).abs() < 0.08, "{theta}");
        let truth = pairwise_loglik(
            &u,
            &sites,
            &ModelParams::M1 {
                cov: CovarianceSpec::exponential(0.3),
            },
            &w,
            PairQuadrature::default(),
        )
        .unwrap();
        assert!(a.objective >= truth - 1e-6 * truth.abs());
        let sum: f64 = a.pairs.iter().map(|p| p.loglik).sum();
        assert!((sum - a.objective).abs() < 1e-9 * a.objective.abs());
        assert!(a.to_json().unwrap().contains("\"theta\""));
    }
}
