//! End-to-end station pipeline: preprocessing, repeated train/holdout splits, fits and
//! out-of-sample comparison of dependence summaries by distance bin.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::{Family, ModelParams};
use crate::error::{invalid, Result};
use crate::fit::study::{pairwise_measures, simulate_observations};
use crate::fit::{
    fit_model, FitSpec, OptimizerControls, PairQuadrature, PairWeightRule, ParamName,
};
use crate::measures::{rank_transform, tail_weighted, PseudoObservations, Tail, DEFAULT_POWER};
use crate::randomfields::{stream_rng, SiteSet};

use super::{
    ar2_residuals, deseasonalize, ingest_csv, make_fixture, CsvSchema, FixtureSpec, ResidualMatrix,
    SeasonalOptions, StationTable,
};

/// Where the station table comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PipelineSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
    },
    Fixture(FixtureSpec),
}

/// Whether residuals are negated before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegateMode {
    /// Negate when the average lower-tail measure of nearby pairs exceeds the upper-tail one.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub source: PipelineSource,
    #[serde(default)]
    pub seasonal: SeasonalOptions,
    #[serde(default)]
    pub negate: NegateMode,
    pub families: Vec<Family>,
    /// Random train/holdout splits.
    pub splits: usize,
    /// Range of the training share of stations.
    pub train_fraction: [f64; 2],
    /// Pair cutoff for the likelihood, in distance units of the sites.
    pub d_max: f64,
    /// Upper bound of length parameters.
    pub scale: f64,
    /// Overrides applied to every family that has the parameter.
    #[serde(default)]
    pub fixed: BTreeMap<ParamName, f64>,
    /// Upper edges of the distance bins; the last bin is open.
    pub bin_edges: Vec<f64>,
    /// Simulated replicates per fitted model on the holdout stations.
    pub draws: usize,
    #[serde(default)]
    pub controls: OptimizerControls,
    #[serde(default)]
    pub quadrature: PairQuadrature,
    pub seed: u64,
}

impl PipelineConfig {
    /// Defaults for stations in kilometres.
    pub fn new(source: PipelineSource, seed: u64) -> Self {
        PipelineConfig {
            source,
            seasonal: SeasonalOptions::default(),
            negate: NegateMode::Auto,
            families: vec![Family::M1, Family::M2, Family::M3, Family::M4, Family::M5],
            splits: 10,
            train_fraction: [0.7, 0.9],
            d_max: 150.0,
            scale: 500.0,
            fixed: BTreeMap::new(),
            bin_edges: vec![100.0, 200.0, 300.0, 400.0, 500.0],
            draws: 5000,
            controls: OptimizerControls::default(),
            quadrature: PairQuadrature::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() || self.splits == 0 {
            return invalid("pipeline needs at least one family and one split");
        }
        let [a, b] = self.train_fraction;
        if !(a > 0.0 && a <= b && b < 1.0) {
            return invalid(format!(
                "train fractions must satisfy 0 < lo <= hi < 1, got [{a}, {b}]"
            ));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return invalid(format!("scale must be positive, got {}", self.scale));
        }
        PairWeightRule::new(self.d_max)?;
        if self.bin_edges.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("bin edges must be strictly increasing");
        }
        if self.draws < 50 {
            return invalid(format!(
                "need at least 50 simulated draws, got {}",
                self.draws
            ));
        }
        if let PipelineSource::Csv { path, .. } = &self.source {
            if !path.exists() {
                return invalid(format!("station file {} does not exist", path.display()));
            }
        }
        for f in &self.families {
            self.spec(*f).validate()?;
        }
        Ok(())
    }

    /// Fit specification of `family`.
    pub fn spec(&self, family: Family) -> FitSpec {
        let mut spec = FitSpec::default_for(family, self.scale);
        for (name, v) in &self.fixed {
            if ParamName::of(family).contains(name) {
                spec = spec.fix(*name, *v);
            }
        }
        spec.controls = self.controls;
        spec.quadrature = self.quadrature;
        spec
    }
}

/// Dependence summaries compared out of sample.
pub const MEASURES: [&str; 3] = ["S_rho", "rho_L", "rho_U"];

/// Residuals ready for fitting.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub residuals: ResidualMatrix,
    pub u: PseudoObservations,
    pub sites: SiteSet,
}

/// Mean lower- and upper-tail measures over station pairs closer than `within`, or over
/// all pairs when none is.
pub fn mean_tail_measures(
    u: &PseudoObservations,
    sites: &SiteSet,
    within: f64,
) -> Result<(f64, f64)> {
    let p = u.ncols();
    let any_near = (0..p).any(|i| (i + 1..p).any(|j| sites.distance(i, j) < within));
    let (mut lo, mut hi, mut k) = (0.0, 0.0, 0.0);
    for i in 0..p {
        for j in i + 1..p {
            if any_near && sites.distance(i, j) >= within {
                continue;
            }
            lo += tail_weighted(u, i, j, Tail::Lower, DEFAULT_POWER)?;
            hi += tail_weighted(u, i, j, Tail::Upper, DEFAULT_POWER)?;
            k += 1.0;
        }
    }
    Ok((lo / k, hi / k))
}

/// Deseasonalises, whitens, optionally negates and rank transforms a station table.
/// Automatic negation compares the tail measures of pairs closer than `within`, the
/// pairs that drive the fit.
pub fn prepare(
    table: &StationTable,
    seasonal: SeasonalOptions,
    negate: NegateMode,
    within: f64,
) -> Result<Prepared> {
    let mut residuals = ar2_residuals(&deseasonalize(table, seasonal)?)?;
    residuals.meta.harmonics = Some(seasonal.harmonics);
    let sites = residuals.sites()?;
    let u = rank_transform(&residuals.values, residuals.ids.clone())?;
    let flip = match negate {
        NegateMode::Always => true,
        NegateMode::Never => false,
        NegateMode::Auto => {
            let (lo, hi) = mean_tail_measures(&u, &sites, within)?;
            lo > hi
        }
    };
    let u = if flip {
        residuals.values.neg_mut();
        rank_transform(&residuals.values, residuals.ids.clone())?
    } else {
        u
    };
    residuals.meta.negated = flip;
    Ok(Prepared {
        residuals,
        u,
        sites,
    })
}

/// Loads the configured table.
pub fn load(source: &PipelineSource) -> Result<StationTable> {
    match source {
        PipelineSource::Csv { path, schema } => ingest_csv(path, schema),
        PipelineSource::Fixture(f) => make_fixture(f),
    }
}

/// Fit of one family on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFit {
    pub family: Family,
    pub estimates: BTreeMap<ParamName, f64>,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub train: Vec<String>,
    pub holdout: Vec<String>,
    pub fits: Vec<SplitFit>,
}

/// Empirical minus model-based measure, averaged over splits, per distance bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow {
    pub family: Family,
    pub measure: String,
    /// `None` where no holdout pair fell in the bin.
    pub bins: Vec<Option<f64>>,
    /// Mean absolute value of the available bins.
    pub mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub negated: bool,
    pub phi: Vec<[f64; 2]>,
    pub non_stationary: Vec<String>,
    pub dropped_missing_rows: usize,
    pub n: usize,
    pub p: usize,
    pub bin_edges: Vec<f64>,
    pub splits: Vec<SplitOutcome>,
    pub rows: Vec<DiscrepancyRow>,
    /// Mean absolute bin discrepancy over all three measures, per family.
    pub aggregate: BTreeMap<Family, f64>,
}

impl PipelineReport {
    /// Family with the smallest aggregate discrepancy.
    pub fn best(&self) -> Option<Family> {
        self.aggregate
            .iter()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(f, _)| *f)
    }

    /// Discrepancy table: one row per family and measure, one column per bin.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["model".to_string(), "measure".to_string()];
        header.extend(bin_labels(&self.bin_edges));
        header.push("mean_abs".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.family.to_string(), r.measure.clone()];
            rec.extend(
                r.bins
                    .iter()
                    .map(|b| b.map(|v| format!("{v:.6}")).unwrap_or_default()),
            );
            rec.push(format!("{:.6}", r.mean_abs));
            w.write_record(&rec)?;
        }
        for (f, a) in &self.aggregate {
            let mut rec = vec![f.to_string(), "aggregate".to_string()];
            rec.extend((0..=self.bin_edges.len()).map(|_| String::new()));
            rec.push(format!("{a:.6}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Column labels of the distance bins.
pub fn bin_labels(edges: &[f64]) -> Vec<String> {
    let mut out = Vec::with_capacity(edges.len() + 1);
    let mut lo: Option<f64> = None;
    for e in edges {
        out.push(match lo {
            None => format!("<{e}"),
            Some(l) => format!("{l}-{e}"),
        });
        lo = Some(*e);
    }
    out.push(match lo {
        None => "all".into(),
        Some(l) => format!(">={l}"),
    });
    out
}

/// Bin of distance `h`.
pub fn bin_of(h: f64, edges: &[f64]) -> usize {
    edges.iter().take_while(|e| h >= **e).count()
}

/// Train/holdout station indices of split `k`.
pub fn split_indices(
    p: usize,
    fraction: [f64; 2],
    seed: u64,
    k: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let lo = ((fraction[0] * p as f64).ceil() as usize).max(2);
    let hi = ((fraction[1] * p as f64).floor() as usize).min(p.saturating_sub(2));
    if lo > hi {
        return invalid(format!(
            "{p} stations cannot be split with training share {fraction:?} and two holdout stations"
        ));
    }
    let mut rng = stream_rng(seed, 1 << 48 | k as u64);
    let m = rng.random_range(lo..=hi);
    let mut idx: Vec<usize> = (0..p).collect();
    idx.shuffle(&mut rng);
    let mut train = idx[..m].to_vec();
    let mut hold = idx[m..].to_vec();
    train.sort_unstable();
    hold.sort_unstable();
    Ok((train, hold))
}

fn columns(u: &PseudoObservations, idx: &[usize]) -> Result<PseudoObservations> {
    PseudoObservations::new(
        u.values.select_columns(idx),
        idx.iter().map(|&j| u.site_ids[j].clone()).collect(),
    )
}

/// Runs the pipeline on prepared residuals.
pub fn run_prepared<F: FnMut(usize, Family)>(
    cfg: &PipelineConfig,
    prep: &Prepared,
    mut progress: F,
) -> Result<PipelineReport> {
    cfg.validate()?;
    let p = prep.u.ncols();
    let nb = cfg.bin_edges.len() + 1;
    let weights = PairWeightRule::new(cfg.d_max)?;
    // per family, measure, bin: sum over splits of the bin mean and the number of splits
    let mut acc: BTreeMap<Family, Vec<Vec<(f64, usize)>>> = cfg
        .families
        .iter()
        .map(|f| (*f, vec![vec![(0.0, 0); nb]; 3]))
        .collect();
    let mut splits = Vec::with_capacity(cfg.splits);
    for k in 0..cfg.splits {
        let (train, hold) = split_indices(p, cfg.train_fraction, cfg.seed, k)?;
        let u_train = columns(&prep.u, &train)?;
        let u_hold = columns(&prep.u, &hold)?;
        let s_train = prep.sites.subset(&train);
        let s_hold = prep.sites.subset(&hold);
        let empirical = pairwise_measures(&u_hold)?;
        let mut bins = Vec::with_capacity(empirical.len());
        for i in 0..hold.len() {
            for j in i + 1..hold.len() {
                bins.push(bin_of(s_hold.distance(i, j), &cfg.bin_edges));
            }
        }
        let split_seed = stream_rng(cfg.seed, 1 << 49 | k as u64).random::<u64>();
        let mut fits = Vec::with_capacity(cfg.families.len());
        for &family in &cfg.families {
            progress(k, family);
            let fit = fit_model(&u_train, &s_train, &cfg.spec(family), &weights, split_seed)?;
            let model = model_measures(&fit.params, &s_hold, cfg.draws, split_seed)?;
            let slot = acc.get_mut(&family).expect("family registered");
            for (m, cells) in slot.iter_mut().enumerate() {
                let mut sum = vec![0.0; nb];
                let mut cnt = vec![0usize; nb];
                for ((e, s), b) in empirical.iter().zip(&model).zip(&bins) {
                    sum[*b] += e[m] - s[m];
                    cnt[*b] += 1;
                }
                for b in 0..nb {
                    if cnt[b] > 0 {
                        cells[b].0 += sum[b] / cnt[b] as f64;
                        cells[b].1 += 1;
                    }
                }
            }
            fits.push(SplitFit {
                family,
                estimates: fit.estimates,
                objective: fit.objective,
                converged: fit.converged,
            });
        }
        splits.push(SplitOutcome {
            train: train.iter().map(|&j| prep.u.site_ids[j].clone()).collect(),
            holdout: hold.iter().map(|&j| prep.u.site_ids[j].clone()).collect(),
            fits,
        });
    }
    let mut rows = Vec::new();
    let mut aggregate = BTreeMap::new();
    for &family in &cfg.families {
        let mut all = Vec::new();
        for (m, cells) in acc[&family].iter().enumerate() {
            let bins: Vec<Option<f64>> = cells
                .iter()
                .map(|(s, c)| (*c > 0).then(|| s / *c as f64))
                .collect();
            let present: Vec<f64> = bins.iter().flatten().map(|v| v.abs()).collect();
            all.extend(&present);
            rows.push(DiscrepancyRow {
                family,
                measure: MEASURES[m].to_string(),
                mean_abs: present.iter().sum::<f64>() / present.len().max(1) as f64,
                bins,
            });
        }
        aggregate.insert(family, all.iter().sum::<f64>() / all.len().max(1) as f64);
    }
    let meta = &prep.residuals.meta;
    Ok(PipelineReport {
        negated: meta.negated,
        phi: meta.phi.clone(),
        non_stationary: prep
            .residuals
            .ids
            .iter()
            .zip(&meta.stationary)
            .filter(|(_, s)| !**s)
            .map(|(id, _)| id.clone())
            .collect(),
        dropped_missing_rows: meta.dropped_missing_rows,
        n: prep.u.nrows(),
        p,
        bin_edges: cfg.bin_edges.clone(),
        splits,
        rows,
        aggregate,
    })
}

/// Model-based pairwise measures at `sites` from `draws` simulated replicates.
pub fn model_measures(
    params: &ModelParams,
    sites: &SiteSet,
    draws: usize,
    seed: u64,
) -> Result<Vec<[f64; 3]>> {
    pairwise_measures(&simulate_observations(
        params,
        sites,
        draws,
        seed ^ 0x0d15_ea5e,
    )?)
}

/// Loads, prepares and runs the configured pipeline.
pub fn run_pipeline<F: FnMut(usize, Family)>(
    cfg: &PipelineConfig,
    progress: F,
) -> Result<(Prepared, PipelineReport)> {
    cfg.validate()?;
    let table = load(&cfg.source)?;
    let prep = prepare(&table, cfg.seasonal, cfg.negate, cfg.d_max)?;
    let report = run_prepared(cfg, &prep, progress)?;
    Ok((prep, report))
}
