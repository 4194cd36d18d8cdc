//! Station data: CSV ingestion, seasonal removal, AR(2) whitening, distances and
//! synthetic fixtures.

pub mod pipeline;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{MixtureMarginal, ModelParams};
use crate::error::{invalid, Error, Result};
use crate::numerics::{norm_cdf, norm_quantile};
use crate::randomfields::{stream_rng, Metric, SiteSet};
use crate::simulate::simulate_model;

/// Column names of the station CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub station_id: String,
    pub lat: String,
    pub lon: String,
    pub date: String,
    pub value: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            station_id: "station_id".into(),
            lat: "lat".into(),
            lon: "lon".into(),
            date: "date".into(),
            value: "value".into(),
        }
    }
}

/// Daily series of several stations on a common date index.
#[derive(Debug, Clone, PartialEq)]
pub struct StationTable {
    pub ids: Vec<String>,
    /// `(latitude, longitude)` in degrees.
    pub coords: Vec<[f64; 2]>,
    pub dates: Vec<NaiveDate>,
    /// `n x p`; missing values are NaN.
    pub values: DMatrix<f64>,
}

impl StationTable {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    /// Rows with at least one missing value.
    pub fn missing_rows(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.values.row(i).iter().any(|v| v.is_nan()))
            .collect()
    }

    pub fn sites(&self) -> Result<SiteSet> {
        SiteSet::with_ids(self.ids.clone(), self.coords.clone(), Metric::GreatCircleKm)
    }

    /// Stations `idx` only.
    pub fn select(&self, idx: &[usize]) -> StationTable {
        StationTable {
            ids: idx.iter().map(|&j| self.ids[j].clone()).collect(),
            coords: idx.iter().map(|&j| self.coords[j]).collect(),
            dates: self.dates.clone(),
            values: self.values.select_columns(idx),
        }
    }

    /// Writes the table in the long CSV layout read by [`ingest_reader`].
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["station_id", "lat", "lon", "date", "value"])?;
        for j in 0..self.p() {
            for (i, d) in self.dates.iter().enumerate() {
                let v = self.values[(i, j)];
                w.write_record([
                    self.ids[j].clone(),
                    self.coords[j][0].to_string(),
                    self.coords[j][1].to_string(),
                    d.format("%Y-%m-%d").to_string(),
                    if v.is_nan() {
                        String::new()
                    } else {
                        v.to_string()
                    },
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_missing(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

/// Reads a long-format station CSV.
pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<StationTable> {
    let f = std::fs::File::open(path.as_ref())?;
    ingest_reader(f, schema)
}

struct Station {
    coord: [f64; 2],
    series: BTreeMap<NaiveDate, f64>,
}

/// Reads a long-format station CSV from any reader. Empty or `NA` values become NaN;
/// every station must report every date of the index.
pub fn ingest_reader<R: Read>(input: R, schema: &CsvSchema) -> Result<StationTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column '{name}'")))
    };
    let (ci, cla, clo, cd, cv) = (
        col(&schema.station_id)?,
        col(&schema.lat)?,
        col(&schema.lon)?,
        col(&schema.date)?,
        col(&schema.value)?,
    );
    let mut order: Vec<String> = Vec::new();
    let mut stations: BTreeMap<String, Station> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        // header is line 1
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize, what: &str| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {line}: bad {what} '{}'", field(i))))
        };
        let id = field(ci).to_string();
        if id.is_empty() {
            return Err(Error::Parse(format!("line {line}: empty station id")));
        }
        let coord = [num(cla, "latitude")?, num(clo, "longitude")?];
        let date = NaiveDate::parse_from_str(field(cd), "%Y-%m-%d")
            .map_err(|_| Error::Parse(format!("line {line}: bad date '{}'", field(cd))))?;
        let value = if parse_missing(field(cv)) {
            f64::NAN
        } else {
            num(cv, "value")?
        };
        let st = stations.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Station {
                coord,
                series: BTreeMap::new(),
            }
        });
        if st.coord != coord {
            return Err(Error::Parse(format!(
                "line {line}: station {id} changes coordinates"
            )));
        }
        if st.series.insert(date, value).is_some() {
            return Err(Error::Parse(format!(
                "line {line}: duplicate date {date} for station {id}"
            )));
        }
    }
    if order.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let index: BTreeSet<NaiveDate> = stations
        .values()
        .flat_map(|s| s.series.keys().copied())
        .collect();
    for id in &order {
        let s = &stations[id];
        if let Some(d) = index.iter().find(|d| !s.series.contains_key(d)) {
            return Err(Error::Alignment(format!(
                "station {id} has no record for {d}"
            )));
        }
    }
    let dates: Vec<NaiveDate> = index.into_iter().collect();
    let values = DMatrix::from_fn(dates.len(), order.len(), |i, j| {
        stations[&order[j]].series[&dates[i]]
    });
    let coords = order.iter().map(|id| stations[id].coord).collect();
    let table = StationTable {
        ids: order,
        coords,
        dates,
        values,
    };
    table.sites()?;
    Ok(table)
}

/// Seasonal regression settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalOptions {
    /// Annual sine/cosine pairs.
    pub harmonics: usize,
    /// Allow fits on less than a year of data.
    pub short_window: bool,
}

impl Default for SeasonalOptions {
    fn default() -> Self {
        SeasonalOptions {
            harmonics: 2,
            short_window: true,
        }
    }
}

const YEAR: f64 = 365.25;

fn design_row(d: &NaiveDate, harmonics: usize) -> Vec<f64> {
    let doy = d.ordinal() as f64;
    let mut row = vec![1.0];
    for k in 1..=harmonics {
        let a = 2.0 * PI * k as f64 * doy / YEAR;
        row.push(a.sin());
        row.push(a.cos());
    }
    row
}

/// Removes an intercept plus annual harmonics from every station by least squares.
pub fn deseasonalize(t: &StationTable, opts: SeasonalOptions) -> Result<StationTable> {
    let n = t.n();
    if n == 0 {
        return invalid("empty table");
    }
    let span = (t.dates[n - 1] - t.dates[0]).num_days() + 1;
    if span < 365 && !opts.short_window {
        return Err(Error::DegenerateSeason(format!(
            "{span} days cover less than a season cycle and short-window mode is off"
        )));
    }
    let k = 1 + 2 * opts.harmonics;
    let rows: Vec<Vec<f64>> = t
        .dates
        .iter()
        .map(|d| design_row(d, opts.harmonics))
        .collect();
    let cols: Vec<Result<Vec<f64>>> = (0..t.p())
        .into_par_iter()
        .map(|j| {
            let ok: Vec<usize> = (0..n).filter(|&i| t.values[(i, j)].is_finite()).collect();
            if ok.len() <= k {
                return Err(Error::DegenerateSeason(format!(
                    "station {} has {} values for {k} seasonal terms",
                    t.ids[j],
                    ok.len()
                )));
            }
            let x = DMatrix::from_fn(ok.len(), k, |i, c| rows[ok[i]][c]);
            let y = DVector::from_iterator(ok.len(), ok.iter().map(|&i| t.values[(i, j)]));
            let svd = x.clone().svd(true, true);
            let smax = svd.singular_values.max();
            if svd.singular_values.min() <= 1e-10 * smax {
                return Err(Error::DegenerateSeason(format!(
                    "seasonal design is rank deficient for station {}",
                    t.ids[j]
                )));
            }
            let beta = svd
                .solve(&y, 0.0)
                .map_err(|e| Error::DegenerateSeason(e.to_string()))?;
            Ok((0..n)
                .map(|i| {
                    let v = t.values[(i, j)];
                    if v.is_finite() {
                        v - rows[i]
                            .iter()
                            .zip(beta.iter())
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                    } else {
                        f64::NAN
                    }
                })
                .collect())
        })
        .collect();
    let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(StationTable {
        values: DMatrix::from_fn(n, t.p(), |i, j| cols[j][i]),
        ..t.clone()
    })
}

/// AR(2) residuals and fit metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    pub ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    /// Dates of the retained rows.
    pub dates: Vec<NaiveDate>,
    pub values: DMatrix<f64>,
    pub meta: ResidualMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualMeta {
    /// `(phi1, phi2)` per station.
    pub phi: Vec<[f64; 2]>,
    /// False when a root of `1 - phi1 z - phi2 z^2` lies within `1 + UNIT_ROOT_MARGIN`
    /// of the origin.
    pub stationary: Vec<bool>,
    /// Leading rows lost to the lags.
    pub dropped_lag_rows: usize,
    /// Rows dropped because some station was missing.
    pub dropped_missing_rows: usize,
    pub harmonics: Option<usize>,
    pub negated: bool,
}

impl ResidualMatrix {
    pub fn sites(&self) -> Result<SiteSet> {
        SiteSet::with_ids(self.ids.clone(), self.coords.clone(), Metric::GreatCircleKm)
    }

    /// Residual matrix CSV: a header of station ids, then one row per retained day.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.ids)?;
        for i in 0..self.values.nrows() {
            w.write_record(self.values.row(i).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Sidecar JSON of the preprocessing metadata, keyed by station.
    pub fn meta_json(&self) -> Result<String> {
        let stations: Vec<serde_json::Value> = self
            .ids
            .iter()
            .zip(&self.meta.phi)
            .zip(&self.meta.stationary)
            .map(|((id, phi), st)| {
                serde_json::json!({ "station_id": id, "phi1": phi[0], "phi2": phi[1], "stationary": st })
            })
            .collect();
        let v = serde_json::json!({
            "n": self.values.nrows(),
            "p": self.values.ncols(),
            "first_date": self.dates.first(),
            "last_date": self.dates.last(),
            "harmonics": self.meta.harmonics,
            "dropped_lag_rows": self.meta.dropped_lag_rows,
            "dropped_missing_rows": self.meta.dropped_missing_rows,
            "negated": self.meta.negated,
            "stations": stations,
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Roots closer than this to the unit circle are flagged as non-stationary.
pub const UNIT_ROOT_MARGIN: f64 = 0.05;

/// Yule-Walker AR(2) coefficients of a series.
pub fn yule_walker_ar2(x: &[f64]) -> Result<[f64; 2]> {
    let n = x.len();
    if n < 20 {
        return invalid(format!("AR(2) fit needs at least 20 values, got {n}"));
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let acov = |k: usize| -> f64 {
        (0..n - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum::<f64>() / n as f64
    };
    let c0 = acov(0);
    if !(c0 > 0.0) {
        return Ok([0.0, 0.0]);
    }
    let (r1, r2) = (acov(1) / c0, acov(2) / c0);
    let d = 1.0 - r1 * r1;
    if d <= 0.0 {
        return Ok([r1.signum(), 0.0]);
    }
    Ok([r1 * (1.0 - r2) / d, (r2 - r1 * r1) / d])
}

/// Whether both roots of `1 - phi1 z - phi2 z^2` lie outside `|z| = 1 + margin`.
pub fn ar2_stationary(phi: [f64; 2], margin: f64) -> bool {
    let [a, b] = phi;
    let min_root = if b == 0.0 {
        if a == 0.0 {
            f64::INFINITY
        } else {
            1.0 / a.abs()
        }
    } else {
        // roots of b z^2 + a z - 1 = 0
        let disc = a * a + 4.0 * b;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let z1 = (-a + s) / (2.0 * b);
            let z2 = (-a - s) / (2.0 * b);
            z1.abs().min(z2.abs())
        } else {
            // complex pair with |z|^2 = -1/b
            (-1.0 / b).sqrt()
        }
    };
    min_root > 1.0 + margin
}

/// Complete-case AR(2) residuals `e_t = z_t - phi1 z_(t-1) - phi2 z_(t-2)` for `t >= 3`.
pub fn ar2_residuals(t: &StationTable) -> Result<ResidualMatrix> {
    let keep: Vec<usize> = (0..t.n())
        .filter(|&i| t.values.row(i).iter().all(|v| v.is_finite()))
        .collect();
    let dropped_missing_rows = t.n() - keep.len();
    let n = keep.len();
    if n < 20 {
        return invalid(format!(
            "AR(2) fit needs at least 20 complete rows, got {n}"
        ));
    }
    let fits: Vec<Result<([f64; 2], Vec<f64>)>> = (0..t.p())
        .into_par_iter()
        .map(|j| {
            let x: Vec<f64> = keep.iter().map(|&i| t.values[(i, j)]).collect();
            let phi = yule_walker_ar2(&x)?;
            let e = (2..n)
                .map(|i| x[i] - phi[0] * x[i - 1] - phi[1] * x[i - 2])
                .collect();
            Ok((phi, e))
        })
        .collect();
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;
    let values = DMatrix::from_fn(n - 2, t.p(), |i, j| fits[j].1[i]);
    let phi: Vec<[f64; 2]> = fits.iter().map(|f| f.0).collect();
    Ok(ResidualMatrix {
        ids: t.ids.clone(),
        coords: t.coords.clone(),
        dates: keep[2..].iter().map(|&i| t.dates[i]).collect(),
        values,
        meta: ResidualMeta {
            stationary: phi
                .iter()
                .map(|p| ar2_stationary(*p, UNIT_ROOT_MARGIN))
                .collect(),
            phi,
            dropped_lag_rows: 2,
            dropped_missing_rows,
            harmonics: None,
            negated: false,
        },
    })
}

/// Pairwise station distances; great-circle distances are in kilometres.
pub fn station_distances(t: &StationTable, mode: Metric) -> Result<DMatrix<f64>> {
    Ok(SiteSet::with_ids(t.ids.clone(), t.coords.clone(), mode)?.distance_matrix())
}

/// Settings of a synthetic station table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub p: usize,
    pub n: usize,
    /// Innovation copula, with lengths in kilometres.
    pub model: ModelParams,
    pub seed: u64,
    /// `[lat0, lat1, lon0, lon1]` of the station box.
    pub bbox: [f64; 4],
    pub start: NaiveDate,
    /// AR(2) coefficients of the noise.
    pub phi: [f64; 2],
    /// Innovation standard deviation.
    pub noise_sd: f64,
    /// Flip the innovations so that upper-tail dependence becomes lower-tail dependence.
    pub lower_tail: bool,
}

impl FixtureSpec {
    /// Stations in a 3 by 8.5 degree box, daily data from 1 May, AR coefficients
    /// `(0.5, 0.2)` and unit innovations.
    pub fn new(p: usize, n: usize, model: ModelParams, seed: u64) -> Self {
        FixtureSpec {
            p,
            n,
            model,
            seed,
            bbox: [34.0, 37.0, -103.0, -94.5],
            start: NaiveDate::from_ymd_opt(2020, 5, 1).expect("valid date"),
            phi: [0.5, 0.2],
            noise_sd: 1.0,
            lower_tail: false,
        }
    }
}

const BURN_IN: usize = 50;

/// Uniform scores of simulated values under the model's own margins.
fn to_uniform(model: &ModelParams, v: f64) -> Result<f64> {
    Ok(match model {
        ModelParams::M1 { .. } => norm_cdf(v),
        // M2 is simulated on the unit Fréchet scale
        ModelParams::M2 { .. } | ModelParams::M3 { .. } => {
            if v > 0.0 {
                (-1.0 / v).exp()
            } else {
                0.0
            }
        }
        ModelParams::M4(m) | ModelParams::M5(m) => MixtureMarginal::new(m.q, m.companion)?.cdf(v),
    })
}

/// Synthetic stations with a seasonal cycle plus AR(2) noise driven by innovations whose
/// spatial copula is the given model.
pub fn make_fixture(spec: &FixtureSpec) -> Result<StationTable> {
    if spec.p < 2 || spec.n < 30 {
        return invalid("fixture needs p >= 2 and n >= 30");
    }
    let [la0, la1, lo0, lo1] = spec.bbox;
    let mut rng = stream_rng(spec.seed, 0);
    let coords: Vec<[f64; 2]> = {
        use rand::Rng;
        (0..spec.p)
            .map(|_| {
                [
                    la0 + (la1 - la0) * rng.random::<f64>(),
                    lo0 + (lo1 - lo0) * rng.random::<f64>(),
                ]
            })
            .collect()
    };
    let ids: Vec<String> = (0..spec.p).map(|j| format!("st{j:03}")).collect();
    let sites = SiteSet::with_ids(ids.clone(), coords.clone(), Metric::GreatCircleKm)?;
    let total = spec.n + BURN_IN;
    let raw = simulate_model(&spec.model, &sites, total, spec.seed)?;
    let sign = if spec.lower_tail { -1.0 } else { 1.0 };
    let mut eps = DMatrix::zeros(total, spec.p);
    for i in 0..total {
        for j in 0..spec.p {
            let u = to_uniform(&spec.model, raw[(i, j)])?.clamp(1e-12, 1.0 - 1e-12);
            eps[(i, j)] = sign * spec.noise_sd * norm_quantile(u);
        }
    }
    let dates: Vec<NaiveDate> = (0..spec.n)
        .map(|i| spec.start + Duration::days(i as i64))
        .collect();
    let mut values = DMatrix::zeros(spec.n, spec.p);
    for j in 0..spec.p {
        let base = 30.0 + 0.5 * j as f64 / spec.p as f64;
        let (mut z1, mut z2) = (0.0, 0.0);
        for i in 0..total {
            let z = spec.phi[0] * z1 + spec.phi[1] * z2 + eps[(i, j)];
            z2 = z1;
            z1 = z;
            if i >= BURN_IN {
                let d = &dates[i - BURN_IN];
                let a = 2.0 * PI * d.ordinal() as f64 / YEAR;
                values[(i - BURN_IN, j)] = base + 8.0 * a.sin() + 3.0 * a.cos() + z;
            }
        }
    }
    Ok(StationTable {
        ids,
        coords,
        dates,
        values,
    })
}
