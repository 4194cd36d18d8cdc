//! Replicated simulation studies: simulate on random sites in the unit square, rank
//! transform, fit, and summarise the estimation error.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::{Family, MixtureParams, ModelParams};
use crate::error::{invalid, Result};
use crate::measures::{
    empirical_spearman, rank_transform, tail_weighted, PseudoObservations, Tail, DEFAULT_POWER,
};
use crate::randomfields::{stream_rng, CompanionSpec, CovarianceSpec, RadiusSpec, SiteSet};
use crate::simulate::simulate_model;

use super::{
    decompose, fit_prepared, FitSpec, LikelihoodData, OptimizerControls, PairQuadrature,
    PairWeightRule, ParamName,
};

/// Settings of one study run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// 1: disk model; 2: Gaussian companion; 3: Student-t/Fréchet companion.
    pub study: u8,
    pub p: usize,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub d_max: f64,
    #[serde(default)]
    pub controls: OptimizerControls,
    #[serde(default)]
    pub quadrature: PairQuadrature,
    /// Replicates simulated per model when comparing dependence summaries (study 3).
    #[serde(default = "default_measure_draws")]
    pub measure_draws: usize,
}

fn default_measure_draws() -> usize {
    20_000
}

impl StudyConfig {
    /// Desk-scale defaults: `p = 20` for study 1 and 3, `p = 30` for study 2, `n = 500`,
    /// 30 replicates for studies 1 and 2 and 20 for study 3, cutoff 0.25 or 0.5.
    pub fn desk(study: u8, seed: u64) -> Self {
        StudyConfig {
            study,
            p: if study == 2 { 30 } else { 20 },
            n: 500,
            replicates: if study == 3 { 20 } else { 30 },
            seed,
            d_max: if study == 3 { 0.5 } else { 0.25 },
            controls: OptimizerControls::default(),
            quadrature: PairQuadrature::default(),
            measure_draws: default_measure_draws(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.study) {
            return invalid(format!("study must be 1, 2 or 3, got {}", self.study));
        }
        if self.p < 2 || self.n < 30 || self.replicates == 0 {
            return invalid("study needs p >= 2, n >= 30 and at least one replicate");
        }
        PairWeightRule::new(self.d_max)?;
        Ok(())
    }
}

fn radius() -> RadiusSpec {
    RadiusSpec {
        r_lower: 0.0,
        r_upper: 0.4,
        cov: CovarianceSpec::exponential(0.25),
    }
}

/// Generating parameters of each study.
pub fn study_truth(study: u8) -> Result<ModelParams> {
    let y = CovarianceSpec::exponential(0.5);
    Ok(match study {
        1 => ModelParams::M3 { radius: radius() },
        2 => ModelParams::M4(MixtureParams {
            radius: radius(),
            q: 0.2,
            companion: CompanionSpec::Gaussian { cov: y },
        }),
        3 => ModelParams::M5(MixtureParams {
            radius: radius(),
            q: 0.2,
            companion: CompanionSpec::StudentFrechet {
                cov: y,
                nu: 3.0,
                beta: 1.2,
            },
        }),
        s => return invalid(format!("unknown study {s}")),
    })
}

/// Fit specification of each study: lower radius, smoothness and, for study 3, the
/// degrees of freedom are held at their true values.
pub fn study_spec(cfg: &StudyConfig) -> Result<FitSpec> {
    let family = study_truth(cfg.study)?.family();
    let mut spec = FitSpec::default_for(family, 1.0);
    spec.controls = cfg.controls;
    spec.quadrature = cfg.quadrature;
    Ok(spec)
}

/// Averaged absolute differences of pairwise dependence summaries.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Discrepancy {
    pub s_rho: f64,
    pub rho_l: f64,
    pub rho_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub estimates: BTreeMap<ParamName, f64>,
    pub converged: bool,
    pub objective: f64,
    /// Log-likelihood at the generating parameters.
    pub truth_objective: f64,
    pub evaluations: usize,
    pub discrepancy: Option<Discrepancy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub truth: BTreeMap<ParamName, f64>,
    pub rmse: BTreeMap<ParamName, f64>,
    pub mean_discrepancy: Option<Discrepancy>,
    pub replicates: Vec<ReplicateOutcome>,
}

/// Seed of replicate `k`.
pub fn replicate_seed(seed: u64, k: usize) -> u64 {
    stream_rng(seed, 1 << 40 | k as u64).random()
}

/// `n` replicates of `params` at `sites`, rank transformed.
pub fn simulate_observations(
    params: &ModelParams,
    sites: &SiteSet,
    n: usize,
    seed: u64,
) -> Result<PseudoObservations> {
    rank_transform(&simulate_model(params, sites, n, seed)?, sites.ids.clone())
}

/// Pairwise Spearman and tail-weighted measures, in row-major pair order.
pub fn pairwise_measures(u: &PseudoObservations) -> Result<Vec<[f64; 3]>> {
    let p = u.ncols();
    let mut out = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in i + 1..p {
            out.push([
                empirical_spearman(u, i, j)?,
                tail_weighted(u, i, j, Tail::Lower, DEFAULT_POWER)?,
                tail_weighted(u, i, j, Tail::Upper, DEFAULT_POWER)?,
            ]);
        }
    }
    Ok(out)
}

/// Mean absolute difference of the pairwise measures of two models, estimated from
/// `draws` simulated replicates of each with common random numbers.
pub fn model_discrepancy(
    a: &ModelParams,
    b: &ModelParams,
    sites: &SiteSet,
    draws: usize,
    seed: u64,
) -> Result<Discrepancy> {
    let ma = pairwise_measures(&simulate_observations(a, sites, draws, seed)?)?;
    let mb = pairwise_measures(&simulate_observations(b, sites, draws, seed)?)?;
    let k = ma.len() as f64;
    let mut d = Discrepancy::default();
    for (x, y) in ma.iter().zip(&mb) {
        d.s_rho += (x[0] - y[0]).abs() / k;
        d.rho_l += (x[1] - y[1]).abs() / k;
        d.rho_u += (x[2] - y[2]).abs() / k;
    }
    Ok(d)
}

/// Runs one replicate.
pub fn run_replicate(cfg: &StudyConfig, k: usize) -> Result<ReplicateOutcome> {
    let truth = study_truth(cfg.study)?;
    let spec = study_spec(cfg)?;
    let seed = replicate_seed(cfg.seed, k);
    let mut rng = stream_rng(seed, 0);
    let sites = SiteSet::uniform(cfg.p, [0.0, 1.0, 0.0, 1.0], &mut rng)?;
    let u = simulate_observations(&truth, &sites, cfg.n, seed)?;
    let weights = PairWeightRule::new(cfg.d_max)?;
    let data = LikelihoodData::new(&u, &sites, &weights)?;
    let fit = fit_prepared(&data, &u, &spec, &weights, seed)?;
    let truth_objective = data.loglik(&truth, spec.quadrature)?;
    let discrepancy = if cfg.study == 3 {
        Some(model_discrepancy(
            &truth,
            &fit.params,
            &sites,
            cfg.measure_draws,
            seed ^ 0x5eed,
        )?)
    } else {
        None
    };
    Ok(ReplicateOutcome {
        replicate: k,
        estimates: fit.estimates,
        converged: fit.converged,
        objective: fit.objective,
        truth_objective,
        evaluations: fit.evaluations,
        discrepancy,
    })
}

/// Summarises replicate outcomes into RMSEs of the free parameters.
pub fn summarize(cfg: &StudyConfig, replicates: Vec<ReplicateOutcome>) -> Result<StudyReport> {
    let truth = decompose(&study_truth(cfg.study)?);
    let spec = study_spec(cfg)?;
    let k = replicates.len() as f64;
    let rmse = spec
        .free
        .iter()
        .map(|p| {
            let t = truth[&p.name];
            let mse = replicates
                .iter()
                .map(|r| (r.estimates[&p.name] - t).powi(2))
                .sum::<f64>()
                / k;
            (p.name, mse.sqrt())
        })
        .collect();
    let ds: Vec<Discrepancy> = replicates.iter().filter_map(|r| r.discrepancy).collect();
    let mean_discrepancy = if ds.is_empty() {
        None
    } else {
        let m = ds.len() as f64;
        Some(Discrepancy {
            s_rho: ds.iter().map(|d| d.s_rho).sum::<f64>() / m,
            rho_l: ds.iter().map(|d| d.rho_l).sum::<f64>() / m,
            rho_u: ds.iter().map(|d| d.rho_u).sum::<f64>() / m,
        })
    };
    Ok(StudyReport {
        config: cfg.clone(),
        truth,
        rmse,
        mean_discrepancy,
        replicates,
    })
}

/// Runs every replicate in order; `progress` is called after each one.
pub fn run_study<F: FnMut(&ReplicateOutcome)>(
    cfg: &StudyConfig,
    mut progress: F,
) -> Result<StudyReport> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.replicates);
    for k in 0..cfg.replicates {
        let r = run_replicate(cfg, k)?;
        progress(&r);
        out.push(r);
    }
    summarize(cfg, out)
}

/// Family fitted in each study.
pub fn study_family(study: u8) -> Result<Family> {
    Ok(study_truth(study)?.family())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_study_runs() {
        let mut cfg = StudyConfig::desk(1, 3);
        cfg.p = 6;
        cfg.n = 60;
        cfg.replicates = 1;
        cfg.d_max = 0.5;
        cfg.controls.max_iter = 40;
        let report = run_study(&cfg, |_| {}).unwrap();
        assert_eq!(report.replicates.len(), 1);
        assert_eq!(report.rmse.len(), 2);
        let r = &report.replicates[0];
        assert!(r.objective >= r.truth_objective - 1e-6 * r.truth_objective.abs());
        assert!(study_truth(4).is_err());
    }
}
