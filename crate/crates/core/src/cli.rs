//! Command-line surface: argument and JSON-config parsing, command runners and CSV/JSON
//! outputs. Every command resolves and validates its inputs before writing any file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::copula::{Family, ModelParams};
use crate::data::pipeline::{
    bin_labels, bin_of, load, prepare, run_prepared, NegateMode, PipelineConfig, PipelineSource,
};
use crate::data::{FixtureSpec, SeasonalOptions};
use crate::error::{invalid, Error, Result};
use crate::fit::study::{run_study, StudyConfig};
use crate::fit::{assemble, fit_model, FitSpec, PairQuadrature, PairWeightRule, ParamName};
use crate::measures::{
    pairwise_summary, rank_transform, PairSummary, PseudoObservations, SummaryOptions,
};
use crate::randomfields::{stream_rng, Metric, SiteSet};
use crate::simulate::{simulate_model, write_realizations};
use crate::tailtheory::{summary_curve, TailSummary};

/// Comma-separated floats, or a JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("'{t}' is not a number")))
            })
            .collect::<Result<Vec<_>>>()
            .map(FloatList)
    }
}

/// Comma-separated families, or a JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FamilyList(pub Vec<Family>);

impl FromStr for FamilyList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(Family::from_str)
            .collect::<Result<Vec<_>>>()
            .map(FamilyList)
    }
}

/// `name=value` pairs such as `r_upper=0.4,theta_r=0.25`, or a JSON object.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamMap(pub BTreeMap<ParamName, f64>);

fn param_name(s: &str) -> Result<ParamName> {
    serde_json::from_value(Value::String(s.trim().to_string()))
        .map_err(|_| Error::InvalidInput(format!("unknown parameter '{s}'")))
}

impl FromStr for ParamMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = BTreeMap::new();
        for item in s.split(',').filter(|t| !t.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("expected name=value, got '{item}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("'{v}' is not a number")))?;
            out.insert(param_name(k)?, v);
        }
        Ok(ParamMap(out))
    }
}

/// `name=lo:hi` boxes, or a JSON object of `[lo, hi]` pairs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundsMap(pub BTreeMap<ParamName, [f64; 2]>);

impl FromStr for BoundsMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = BTreeMap::new();
        for item in s.split(',').filter(|t| !t.trim().is_empty()) {
            let bad = || Error::InvalidInput(format!("expected name=lo:hi, got '{item}'"));
            let (k, v) = item.split_once('=').ok_or_else(bad)?;
            let (lo, hi) = v.split_once(':').ok_or_else(bad)?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            out.insert(param_name(k)?, [lo, hi]);
        }
        Ok(BoundsMap(out))
    }
}

impl fmt::Display for ParamMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "maxconv",
    version,
    about = "Spatial extremes with random disk max-convolutions"
)]
pub struct Cli {
    /// JSON file with global keys and one object per command name.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; required by every stochastic command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate replicates of a model at a set of sites.
    Simulate(SimulateArgs),
    /// Fit a model family by weighted pairwise likelihood.
    Fit(FitArgs),
    /// Theoretical dependence curves and binned empirical summaries.
    Summary(SummaryArgs),
    /// Replicate one of the simulation studies and tabulate RMSEs.
    ReplicateStudy(StudyArgs),
    /// Station data pipeline with out-of-sample model comparison.
    Pipeline(PipelineArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Summary(_) => "summary",
            Command::ReplicateStudy(_) => "replicate-study",
            Command::Pipeline(_) => "pipeline",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    /// Model parameters, e.g. `r_upper=0.4,theta_r=0.25`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamMap>,
    /// Site file with columns `site_id,x,y`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<PathBuf>,
    /// Number of uniformly placed random sites.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_sites: Option<usize>,
    /// Site domain `x0,x1,y0,y1`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<FloatList>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    /// Replicates.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Also simulate one replicate on a `k x k` grid over the domain.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_side: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArgs {
    /// Data matrix CSV: a header of site ids, one row per replicate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    /// Pairs at distance below this cutoff get weight 1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_max: Option<f64>,
    /// Upper bound of the length parameters.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Parameters held fixed, e.g. `r_lower=0.05`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed: Option<ParamMap>,
    /// Boxes of free parameters, e.g. `r_upper=0.05:1`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsMap>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    /// Use Gauss-Legendre quadrature of this order instead of the fast kernel.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature_order: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryArgs {
    /// Model for theoretical curves (M1 or M3).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamMap>,
    /// Distance grid `from,to,steps`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_grid: Option<FloatList>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    /// Data matrix for empirical summaries.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    /// Upper edges of the distance bins.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<FloatList>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyArgs {
    /// Study 1, 2 or 3.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<u8>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<u64>,
    /// Simulated replicates per model for the study-3 dependence comparison.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure_draws: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineArgs {
    /// Station CSV with columns `station_id,lat,lon,date,value`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stations: Option<PathBuf>,
    /// Generate a synthetic station table from this family instead.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture_family: Option<Family>,
    /// Fixture model parameters, lengths in kilometres.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture_params: Option<ParamMap>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture_p: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture_n: Option<usize>,
    /// Flip the fixture so that its tail dependence is in the lower tail.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture_lower_tail: Option<bool>,
    /// `auto`, `always` or `never`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negate: Option<NegateArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub families: Option<FamilyList>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splits: Option<usize>,
    /// Training share of stations `lo,hi`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<FloatList>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Parameters held fixed in every family that has them.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed: Option<ParamMap>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<FloatList>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonics: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NegateArg(pub NegateMode);

impl FromStr for NegateArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(NegateArg(NegateMode::Auto)),
            "always" | "yes" | "true" => Ok(NegateArg(NegateMode::Always)),
            "never" | "no" | "false" => Ok(NegateArg(NegateMode::Never)),
            _ => invalid(format!("negate must be auto, always or never, got '{s}'")),
        }
    }
}

/// Global settings after merging flags over the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Globals {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: PathBuf,
}

impl Globals {
    fn seed(&self, command: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidInput(format!("{command} is stochastic; pass --seed")))
    }
}

/// Overlays the non-null fields of `flags` on `base`.
fn overlay<T: Serialize + DeserializeOwned>(base: Option<&Value>, flags: &T) -> Result<T> {
    let mut merged = match base {
        Some(Value::Object(m)) => m.clone(),
        Some(Value::Null) | None => serde_json::Map::new(),
        Some(_) => return invalid("command section of the config must be a JSON object"),
    };
    if let Value::Object(f) = serde_json::to_value(flags)? {
        merged.extend(f);
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| Error::InvalidInput(format!("config: {e}")))
}

/// A file written by a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn output(name: &str, bytes: Vec<u8>) -> Output {
    Output {
        name: name.to_string(),
        bytes,
    }
}

/// Writes outputs into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, outputs: &[Output]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for o in outputs {
        fs::write(dir.join(&o.name), &o.bytes)?;
    }
    Ok(())
}

/// Parses flags and config, runs the command and writes its outputs. Returns the paths
/// written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    let config: Value = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| {
                Error::InvalidInput(format!("cannot read config {}: {e}", p.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                Error::InvalidInput(format!("config {} is not valid JSON: {e}", p.display()))
            })?
        }
        None => Value::Object(Default::default()),
    };
    if !config.is_object() {
        return invalid("config must be a JSON object");
    }
    let known = [
        "seed",
        "threads",
        "out",
        "simulate",
        "fit",
        "summary",
        "replicate-study",
        "pipeline",
    ];
    if let Some(k) = config
        .as_object()
        .and_then(|m| m.keys().find(|k| !known.contains(&k.as_str())))
    {
        return invalid(format!("unknown config key '{k}'"));
    }
    let globals = Globals {
        seed: cli.seed.or(config.get("seed").and_then(Value::as_u64)),
        threads: cli.threads.or(config
            .get("threads")
            .and_then(Value::as_u64)
            .map(|t| t as usize)),
        out: cli
            .out
            .clone()
            .or(config.get("out").and_then(Value::as_str).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    if let Some(t) = globals.threads {
        if t == 0 {
            return invalid("--threads must be positive");
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    let section = config.get(cli.command.name());
    let outputs = match &cli.command {
        Command::Simulate(a) => cmd_simulate(&overlay(section, a)?, &globals)?,
        Command::Fit(a) => cmd_fit(&overlay(section, a)?, &globals)?,
        Command::Summary(a) => cmd_summary(&overlay(section, a)?, &globals)?,
        Command::ReplicateStudy(a) => cmd_replicate_study(&overlay(section, a)?, &globals)?,
        Command::Pipeline(a) => cmd_pipeline(&overlay(section, a)?, &globals)?,
    };
    write_outputs(&globals.out, &outputs)?;
    Ok(outputs.iter().map(|o| globals.out.join(&o.name)).collect())
}

/// Fills default smoothness, lower radius and companion degrees of freedom, then builds
/// the parameter record.
pub fn model_from(family: Family, params: &ParamMap) -> Result<ModelParams> {
    use ParamName::*;
    let mut all = BTreeMap::new();
    for n in ParamName::of(family) {
        match n {
            Alpha | AlphaR | AlphaY => {
                all.insert(*n, 1.0);
            }
            RLower => {
                all.insert(*n, 0.0);
            }
            Nu if family == Family::M5 => {
                all.insert(*n, 3.0);
            }
            _ => {}
        }
    }
    for (k, v) in &params.0 {
        if !ParamName::of(family).contains(k) {
            return invalid(format!("{k} is not a {family} parameter"));
        }
        all.insert(*k, *v);
    }
    if let Some(m) = ParamName::of(family).iter().find(|n| !all.contains_key(n)) {
        return invalid(format!("{family} needs a value for {m}"));
    }
    assemble(family, &all)
}

fn domain_of(d: &Option<FloatList>) -> Result<[f64; 4]> {
    match d {
        None => Ok([0.0, 1.0, 0.0, 1.0]),
        Some(FloatList(v)) if v.len() == 4 && v[0] < v[1] && v[2] < v[3] => {
            Ok([v[0], v[1], v[2], v[3]])
        }
        Some(FloatList(v)) => invalid(format!(
            "domain must be x0,x1,y0,y1 with x0<x1 and y0<y1, got {v:?}"
        )),
    }
}

/// Reads a site file with columns `site_id,x,y`.
pub fn read_sites(path: &Path, metric: Metric) -> Result<SiteSet> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read sites {}: {e}", path.display())))?;
    let (mut ids, mut coords) = (Vec::new(), Vec::new());
    for (k, rec) in r.records().enumerate() {
        let rec =
            rec.map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), k + 2)))?;
        if rec.len() < 3 {
            return Err(Error::Parse(format!(
                "{} line {}: expected site_id,x,y",
                path.display(),
                k + 2
            )));
        }
        let num = |i: usize| {
            rec[i].trim().parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "{} line {}: bad coordinate '{}'",
                    path.display(),
                    k + 2,
                    &rec[i]
                ))
            })
        };
        ids.push(rec[0].trim().to_string());
        coords.push([num(1)?, num(2)?]);
    }
    if ids.len() < 2 {
        return invalid(format!("{} lists fewer than two sites", path.display()));
    }
    SiteSet::with_ids(ids, coords, metric)
}

pub fn sites_csv(sites: &SiteSet) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["site_id", "x", "y"])?;
    for (id, c) in sites.ids.iter().zip(&sites.coords) {
        w.write_record([id.clone(), c[0].to_string(), c[1].to_string()])?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Reads a data matrix CSV: a header of site ids and one numeric row per replicate.
pub fn read_matrix(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read data {}: {e}", path.display())))?;
    let ids: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec =
            rec.map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), k + 2)))?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "{} line {}: bad value '{s}'",
                        path.display(),
                        k + 2
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let p = ids.len();
    let m = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    Ok((ids, m))
}

pub fn matrix_csv(ids: &[String], m: &DMatrix<f64>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ids)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Data matrix aligned with its site file and rank transformed.
fn load_observations(data: &Path, sites: &SiteSet) -> Result<PseudoObservations> {
    let (ids, m) = read_matrix(data)?;
    if ids != sites.ids {
        return Err(Error::Dimension(format!(
            "data columns {:?} do not match site ids {:?}",
            ids, sites.ids
        )));
    }
    rank_transform(&m, ids)
}

pub fn cmd_simulate(a: &SimulateArgs, g: &Globals) -> Result<Vec<Output>> {
    let seed = g.seed("simulate")?;
    let family = a
        .family
        .ok_or_else(|| Error::InvalidInput("simulate needs --family".into()))?;
    let model = model_from(family, a.params.as_ref().unwrap_or(&ParamMap::default()))?;
    let n =
        a.n.ok_or_else(|| Error::InvalidInput("simulate needs --n".into()))?;
    if n == 0 {
        return invalid("--n must be positive");
    }
    let domain = domain_of(&a.domain)?;
    let sites = match (&a.sites, a.random_sites) {
        (Some(p), None) => read_sites(p, a.metric.unwrap_or_default())?,
        (None, Some(k)) if k >= 1 => SiteSet::uniform(k, domain, &mut stream_rng(seed, 1 << 50))?,
        _ => return invalid("give exactly one of --sites and --random-sites (>= 1)"),
    };
    if let Some(k) = a.field_side {
        if !(2..=200).contains(&k) {
            return invalid(format!("--field-side must lie in [2, 200], got {k}"));
        }
    }
    let values = simulate_model(&model, &sites, n, seed)?;
    let mut out = vec![
        output("sites.csv", sites_csv(&sites)?),
        output("realizations.csv", matrix_csv(&sites.ids, &values)?),
        output("model.json", serde_json::to_vec_pretty(&model)?),
    ];
    if let Some(k) = a.field_side {
        let [x0, x1, y0, y1] = domain;
        let coords: Vec<[f64; 2]> = (0..k * k)
            .map(|i| {
                let (ix, iy) = (i % k, i / k);
                [
                    x0 + (x1 - x0) * ix as f64 / (k - 1) as f64,
                    y0 + (y1 - y0) * iy as f64 / (k - 1) as f64,
                ]
            })
            .collect();
        let grid = SiteSet::new(coords)?;
        let field = simulate_model(&model, &grid, 1, seed ^ 0xf1e1d)?;
        let mut buf = Vec::new();
        write_realizations(&mut buf, &grid, &field)?;
        out.push(output("field.csv", buf));
    }
    Ok(out)
}

/// Fit specification from command options.
pub fn fit_spec(a: &FitArgs, family: Family) -> Result<FitSpec> {
    let mut spec = FitSpec::default_for(family, a.scale.unwrap_or(1.0));
    for (k, v) in &a.fixed.clone().unwrap_or_default().0 {
        spec = spec.fix(*k, *v);
    }
    for (k, [lo, hi]) in &a.bounds.clone().unwrap_or_default().0 {
        spec = spec.free(*k, *lo, *hi);
    }
    if let Some(m) = a.max_iter {
        spec.controls.max_iter = m;
    }
    if let Some(s) = a.starts {
        spec.controls.starts = s;
    }
    if let Some(o) = a.quadrature_order {
        spec.quadrature = PairQuadrature::Exact { order: o };
    }
    spec.validate()?;
    Ok(spec)
}

pub fn cmd_fit(a: &FitArgs, g: &Globals) -> Result<Vec<Output>> {
    let seed = g.seed("fit")?;
    let family = a
        .family
        .ok_or_else(|| Error::InvalidInput("fit needs --family".into()))?;
    let (Some(data), Some(sites)) = (&a.data, &a.sites) else {
        return invalid("fit needs --data and --sites");
    };
    let spec = fit_spec(a, family)?;
    let weights = PairWeightRule::new(a.d_max.unwrap_or(0.25))?;
    let sites = read_sites(sites, a.metric.unwrap_or_default())?;
    let u = load_observations(data, &sites)?;
    let fit = fit_model(&u, &sites, &spec, &weights, seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &fit.pairs {
        w.serialize(p)?;
    }
    let pairs = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(vec![
        output("fit.json", fit.to_json()?.into_bytes()),
        output("pairs.csv", pairs),
    ])
}

/// Distance grid from `from,to,steps`.
fn h_grid(v: &Option<FloatList>) -> Result<Vec<f64>> {
    let (from, to, steps) = match v {
        None => (0.0, 1.0, 41.0),
        Some(FloatList(v)) if v.len() == 3 => (v[0], v[1], v[2]),
        Some(FloatList(v)) => return invalid(format!("h grid must be from,to,steps, got {v:?}")),
    };
    if !(from >= 0.0 && to >= from && steps >= 1.0 && steps.fract() == 0.0) {
        return invalid("h grid needs 0 <= from <= to and a positive whole number of steps");
    }
    let k = steps as usize;
    Ok((0..k)
        .map(|i| {
            if k == 1 {
                from
            } else {
                from + (to - from) * i as f64 / (k - 1) as f64
            }
        })
        .collect())
}

/// Theoretical curve rows `(h, S_rho, lambda_U, kappa_L)`.
pub fn theoretical_curve(
    model: &ModelParams,
    hs: &[f64],
    order: usize,
) -> Result<Vec<TailSummary>> {
    match model {
        ModelParams::M3 { radius } => summary_curve(hs, radius, order),
        ModelParams::M1 { cov } => Ok(hs
            .iter()
            .map(|&h| {
                let r = cov.correlation(h);
                TailSummary {
                    h,
                    lambda_u: if r >= 1.0 { 1.0 } else { 0.0 },
                    spearman: 6.0 / std::f64::consts::PI * (r / 2.0).asin(),
                    kappa_l: 2.0 / (1.0 + r),
                }
            })
            .collect()),
        m => invalid(format!(
            "theoretical curves are available for M1 and M3, not {}",
            m.family()
        )),
    }
}

/// Curve table with columns `h,S_rho,lambda_U,kappa_L`.
pub fn curve_csv(rows: &[TailSummary]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["h", "S_rho", "lambda_U", "kappa_L"])?;
    for r in rows {
        w.write_record([r.h, r.spearman, r.lambda_u, r.kappa_l].map(|v| v.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Pairwise summaries averaged by distance bin.
pub fn binned_summary(rows: &[PairSummary], edges: &[f64]) -> Result<Vec<u8>> {
    let labels = bin_labels(edges);
    let nb = labels.len();
    let mut acc = vec![[0.0f64; 4]; nb];
    let mut cnt = vec![0usize; nb];
    for r in rows {
        let b = bin_of(r.distance, edges);
        for (k, v) in [r.s_rho, r.rho_l, r.rho_u, r.rho_n].into_iter().enumerate() {
            acc[b][k] += v;
        }
        cnt[b] += 1;
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin", "pairs", "S_rho", "rho_L", "rho_U", "rho_N"])?;
    for b in 0..nb {
        let mean = |k: usize| {
            if cnt[b] == 0 {
                String::new()
            } else {
                format!("{:.6}", acc[b][k] / cnt[b] as f64)
            }
        };
        w.write_record([
            labels[b].clone(),
            cnt[b].to_string(),
            mean(0),
            mean(1),
            mean(2),
            mean(3),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

fn pair_summary_csv(rows: &[PairSummary]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    crate::measures::write_pairwise_csv(&mut buf, rows)?;
    Ok(buf)
}

pub fn cmd_summary(a: &SummaryArgs, _g: &Globals) -> Result<Vec<Output>> {
    let model = match a.family {
        Some(f) => Some(model_from(
            f,
            a.params.as_ref().unwrap_or(&ParamMap::default()),
        )?),
        None => None,
    };
    let hs = h_grid(&a.h_grid)?;
    let order = a.order.unwrap_or(40);
    if order < 2 {
        return invalid("--order must be at least 2");
    }
    let data = match (&a.data, &a.sites) {
        (Some(d), Some(s)) => {
            let sites = read_sites(s, a.metric.unwrap_or_default())?;
            Some((load_observations(d, &sites)?, sites))
        }
        (None, None) => None,
        _ => return invalid("empirical summaries need both --data and --sites"),
    };
    if model.is_none() && data.is_none() {
        return invalid("summary needs a model (--family, --params) or data (--data, --sites)");
    }
    let edges = a
        .bins
        .clone()
        .map(|b| b.0)
        .unwrap_or_else(|| vec![0.1, 0.2, 0.3, 0.4, 0.5]);
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("bin edges must be strictly increasing");
    }
    let mut out = Vec::new();
    if let Some(m) = &model {
        let rows = theoretical_curve(m, &hs, order)?;
        out.push(output("curve.csv", curve_csv(&rows)?));
    }
    if let Some((u, sites)) = &data {
        let rows = pairwise_summary(u, sites, SummaryOptions::default())?;
        out.push(output("pairs.csv", pair_summary_csv(&rows)?));
        out.push(output("binned.csv", binned_summary(&rows, &edges)?));
    }
    Ok(out)
}

pub fn cmd_replicate_study(a: &StudyArgs, g: &Globals) -> Result<Vec<Output>> {
    let seed = g.seed("replicate-study")?;
    let study = a
        .study
        .ok_or_else(|| Error::InvalidInput("replicate-study needs --study".into()))?;
    let mut cfg = StudyConfig::desk(study, seed);
    if let Some(v) = a.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = a.p {
        cfg.p = v;
    }
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.d_max {
        cfg.d_max = v;
    }
    if let Some(v) = a.max_iter {
        cfg.controls.max_iter = v;
    }
    if let Some(v) = a.measure_draws {
        cfg.measure_draws = v;
    }
    cfg.validate()?;
    let report = run_study(&cfg, |r| {
        eprintln!(
            "replicate {} objective {:.3} converged {}",
            r.replicate, r.objective, r.converged
        )
    })?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "study",
        "p",
        "n",
        "replicates",
        "parameter",
        "truth",
        "rmse",
    ])?;
    for (name, rmse) in &report.rmse {
        w.write_record([
            study.to_string(),
            cfg.p.to_string(),
            cfg.n.to_string(),
            cfg.replicates.to_string(),
            name.to_string(),
            report.truth[name].to_string(),
            format!("{rmse:.6}"),
        ])?;
    }
    let rmse = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let names: Vec<ParamName> = report.rmse.keys().copied().collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "replicate".to_string(),
        "objective".into(),
        "truth_objective".into(),
        "converged".into(),
    ];
    header.extend(names.iter().map(|n| n.to_string()));
    header.extend(["d_S_rho".into(), "d_rho_L".into(), "d_rho_U".into()]);
    w.write_record(&header)?;
    for r in &report.replicates {
        let mut rec = vec![
            r.replicate.to_string(),
            r.objective.to_string(),
            r.truth_objective.to_string(),
            r.converged.to_string(),
        ];
        rec.extend(names.iter().map(|n| r.estimates[n].to_string()));
        match r.discrepancy {
            Some(d) => rec.extend([
                d.s_rho.to_string(),
                d.rho_l.to_string(),
                d.rho_u.to_string(),
            ]),
            None => rec.extend([String::new(), String::new(), String::new()]),
        }
        w.write_record(&rec)?;
    }
    let reps = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut out = vec![
        output("rmse.csv", rmse),
        output("replicates.csv", reps),
        output("report.json", serde_json::to_vec_pretty(&report)?),
    ];
    if let Some(d) = report.mean_discrepancy {
        let text = format!(
            "measure,mean_abs_difference\nS_rho,{:.6}\nrho_L,{:.6}\nrho_U,{:.6}\n",
            d.s_rho, d.rho_l, d.rho_u
        );
        out.push(output("discrepancy.csv", text.into_bytes()));
    }
    Ok(out)
}

/// Pipeline configuration from command options.
pub fn pipeline_config(a: &PipelineArgs, seed: u64) -> Result<PipelineConfig> {
    let source = match (&a.stations, a.fixture_family) {
        (Some(p), None) => PipelineSource::Csv {
            path: p.clone(),
            schema: Default::default(),
        },
        (None, Some(f)) => {
            let model = model_from(f, a.fixture_params.as_ref().unwrap_or(&ParamMap::default()))?;
            let mut spec = FixtureSpec::new(
                a.fixture_p.unwrap_or(100),
                a.fixture_n.unwrap_or(153),
                model,
                seed,
            );
            spec.lower_tail = a.fixture_lower_tail.unwrap_or(false);
            if spec.p < 2 || spec.n < 30 {
                return invalid("fixture needs p >= 2 and n >= 30");
            }
            PipelineSource::Fixture(spec)
        }
        _ => return invalid("give exactly one of --stations and --fixture-family"),
    };
    let mut cfg = PipelineConfig::new(source, seed);
    if let Some(n) = a.negate {
        cfg.negate = n.0;
    }
    if let Some(f) = &a.families {
        cfg.families = f.0.clone();
    }
    if let Some(s) = a.splits {
        cfg.splits = s;
    }
    if let Some(FloatList(t)) = &a.train_fraction {
        if t.len() != 2 {
            return invalid("train fraction must be lo,hi");
        }
        cfg.train_fraction = [t[0], t[1]];
    }
    if let Some(d) = a.d_max {
        cfg.d_max = d;
    }
    if let Some(s) = a.scale {
        cfg.scale = s;
    }
    if let Some(f) = &a.fixed {
        cfg.fixed = f.0.clone();
    }
    if let Some(b) = &a.bins {
        cfg.bin_edges = b.0.clone();
    }
    if let Some(d) = a.draws {
        cfg.draws = d;
    }
    if let Some(h) = a.harmonics {
        cfg.seasonal = SeasonalOptions {
            harmonics: h,
            ..cfg.seasonal
        };
    }
    if let Some(m) = a.max_iter {
        cfg.controls.max_iter = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_pipeline(a: &PipelineArgs, g: &Globals) -> Result<Vec<Output>> {
    let seed = g.seed("pipeline")?;
    let cfg = pipeline_config(a, seed)?;
    let table = load(&cfg.source)?;
    let prep = prepare(&table, cfg.seasonal, cfg.negate, cfg.d_max)?;
    let report = run_prepared(&cfg, &prep, |k, f| eprintln!("split {k}: fitting {f}"))?;
    let mut residuals = Vec::new();
    prep.residuals.write_csv(&mut residuals)?;
    let mut table_csv = Vec::new();
    report.write_csv(&mut table_csv)?;
    let rows = pairwise_summary(&prep.u, &prep.sites, SummaryOptions::default())?;
    let mut out = vec![
        output("residuals.csv", residuals),
        output("residuals.json", prep.residuals.meta_json()?.into_bytes()),
        output("data_summary.csv", binned_summary(&rows, &cfg.bin_edges)?),
        output("discrepancy.csv", table_csv),
        output("report.json", serde_json::to_vec_pretty(&report)?),
        output("config.json", serde_json::to_vec_pretty(&cfg)?),
    ];
    if let PipelineSource::Fixture(_) = cfg.source {
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        out.push(output("stations.csv", buf));
    }
    Ok(out)
}
