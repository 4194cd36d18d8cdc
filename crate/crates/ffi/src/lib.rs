//! C ABI over the `maxconv` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new` style functions and
//! released by the matching `*_free`. Every fallible call returns a [`MaxconvStatus`]
//! and writes its result through an out pointer; on failure the message is kept per
//! thread and read with [`maxconv_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use maxconv::copula::{Family, ModelParams, PairCopula};
use maxconv::fit::{fit_model, FitResult, FitSpec, PairWeightRule};
use maxconv::measures::rank_transform;
use maxconv::randomfields::{Metric, SiteSet};
use maxconv::{geometry, simulate, tailtheory, Error};
use nalgebra::DMatrix;

/// Result codes. Codes 2 to 4 match the exit codes of the command-line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxconvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numeric = 3,
    NonConvergence = 4,
    Panic = 5,
}

/// Distance used between sites.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxconvMetric {
    Euclidean = 0,
    /// Coordinates are latitude and longitude in degrees; distances in kilometres.
    GreatCircleKm = 1,
}

/// Model family identifiers.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxconvFamily {
    M1 = 1,
    M2 = 2,
    M3 = 3,
    M4 = 4,
    M5 = 5,
}

/// Opaque set of sites.
pub struct MaxconvSites(SiteSet);

/// Opaque model parameter record.
pub struct MaxconvModel(ModelParams);

/// Opaque fit result.
pub struct MaxconvFit(FitResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MaxconvStatus {
    match e.exit_code() {
        3 => MaxconvStatus::Numeric,
        4 => MaxconvStatus::NonConvergence,
        _ => MaxconvStatus::InvalidInput,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard<F: FnOnce() -> Result<(), Error>>(f: F) -> MaxconvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MaxconvStatus::Ok
        }
        Ok(Err(e)) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            MaxconvStatus::Panic
        }
    }
}

fn null_error(what: &str) -> MaxconvStatus {
    set_error(format!("{what} is null"));
    MaxconvStatus::NullPointer
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return null_error(stringify!($p));
        })+
    };
}

/// Message of the last failed call on this thread, or null. The pointer stays valid
/// until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn maxconv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn maxconv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Area of the intersection of disks of radii `r1`, `r2` at centre distance `h`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn maxconv_lens_area(
    r1: f64,
    r2: f64,
    h: f64,
    out: *mut f64,
) -> MaxconvStatus {
    non_null!(out);
    guard(|| {
        *out = geometry::lens_area(r1, r2, h)?;
        Ok(())
    })
}

/// Creates a site set from `count` coordinate pairs stored as `x0, y0, x1, y1, ...`.
///
/// # Safety
/// `xy` must point to `2 * count` readable doubles and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn maxconv_sites_new(
    xy: *const f64,
    count: usize,
    metric: MaxconvMetric,
    out: *mut *mut MaxconvSites,
) -> MaxconvStatus {
    non_null!(xy, out);
    guard(|| {
        let v = std::slice::from_raw_parts(xy, 2 * count);
        let coords = v.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let ids = (0..count).map(|i| format!("s{i}")).collect();
        let m = match metric {
            MaxconvMetric::Euclidean => Metric::Euclidean,
            MaxconvMetric::GreatCircleKm => Metric::GreatCircleKm,
        };
        let s = SiteSet::with_ids(ids, coords, m)?;
        *out = Box::into_raw(Box::new(MaxconvSites(s)));
        Ok(())
    })
}

/// Number of sites.
///
/// # Safety
/// `sites` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn maxconv_sites_len(sites: *const MaxconvSites) -> usize {
    sites.as_ref().map_or(0, |s| s.0.len())
}

/// # Safety
/// `sites` must be null or a handle from [`maxconv_sites_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn maxconv_sites_free(sites: *mut MaxconvSites) {
    if !sites.is_null() {
        drop(Box::from_raw(sites));
    }
}

fn store_model(p: ModelParams, out: *mut *mut MaxconvModel) -> Result<(), Error> {
    p.validate()?;
    // SAFETY: callers check `out` for null.
    unsafe { *out = Box::into_raw(Box::new(MaxconvModel(p))) };
    Ok(())
}

/// Creates a model from its JSON record, as written by the command-line tool.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn maxconv_model_from_json(
    json: *const c_char,
    out: *mut *mut MaxconvModel,
) -> MaxconvStatus {
    non_null!(json, out);
    guard(|| {
        let s = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Error::InvalidInput("model JSON is not UTF-8".into()))?;
        let p: ModelParams =
            serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("model JSON: {e}")))?;
        store_model(p, out)
    })
}

/// Disk model with uniform radii on `[r_lower, r_upper]` driven by a Gaussian process
/// with exponential correlation of range `theta_r`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn maxconv_model_disk(
    r_lower: f64,
    r_upper: f64,
    theta_r: f64,
    out: *mut *mut MaxconvModel,
) -> MaxconvStatus {
    non_null!(out);
    guard(|| {
        let radius = maxconv::randomfields::RadiusSpec::new(
            r_lower,
            r_upper,
            maxconv::randomfields::CovarianceSpec::exponential(theta_r),
        )?;
        store_model(ModelParams::M3 { radius }, out)
    })
}

/// JSON record of a model. Free the string with [`maxconv_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn maxconv_model_to_json(
    model: *const MaxconvModel,
    out: *mut *mut c_char,
) -> MaxconvStatus {
    non_null!(model, out);
    guard(|| {
        let s = serde_json::to_string(&(*model).0).map_err(Error::from)?;
        *out = CString::new(s).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// Family of a model.
///
/// # Safety
/// `model` must be a live handle and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn maxconv_model_family(
    model: *const MaxconvModel,
    out: *mut MaxconvFamily,
) -> MaxconvStatus {
    non_null!(model, out);
    guard(|| {
        *out = match (*model).0.family() {
            Family::M1 => MaxconvFamily::M1,
            Family::M2 => MaxconvFamily::M2,
            Family::M3 => MaxconvFamily::M3,
            Family::M4 => MaxconvFamily::M4,
            Family::M5 => MaxconvFamily::M5,
        };
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a model handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn maxconv_model_free(model: *mut MaxconvModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Bivariate copula distribution function at distance `h`.
///
/// # Safety
/// `model` must be a live handle and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn maxconv_copula_cdf(
    model: *const MaxconvModel,
    h: f64,
    u1: f64,
    u2: f64,
    out: *mut f64,
) -> MaxconvStatus {
    non_null!(model, out);
    guard(|| {
        *out = PairCopula::new(&(*model).0, h, 40)?.cdf(u1, u2)?;
        Ok(())
    })
}

/// Bivariate copula density at distance `h`.
///
/// # Safety
/// `model` must be a live handle and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn maxconv_copula_pdf(
    model: *const MaxconvModel,
    h: f64,
    u1: f64,
    u2: f64,
    out: *mut f64,
) -> MaxconvStatus {
    non_null!(model, out);
    guard(|| {
        *out = PairCopula::new(&(*model).0, h, 40)?.pdf(u1, u2)?;
        Ok(())
    })
}

fn disk_radius(model: &ModelParams) -> Result<&maxconv::randomfields::RadiusSpec, Error> {
    match model {
        ModelParams::M3 { radius } => Ok(radius),
        m => Err(Error::InvalidInput(format!(
            "tail summaries need the disk model, got {}",
            m.family()
        ))),
    }
}

/// Upper tail-dependence coefficient, Spearman's rho and lower tail order of the disk
/// model at distance `h`, written to `out[0..3]`.
///
/// # Safety
/// `model` must be a live handle and `out` must be valid for three writes.
#[no_mangle]
pub unsafe extern "C" fn maxconv_tail_summary(
    model: *const MaxconvModel,
    h: f64,
    out: *mut f64,
) -> MaxconvStatus {
    non_null!(model, out);
    guard(|| {
        let t = tailtheory::tail_summary(h, disk_radius(&(*model).0)?, 40)?;
        let o = std::slice::from_raw_parts_mut(out, 3);
        o.copy_from_slice(&[t.lambda_u, t.spearman, t.kappa_l]);
        Ok(())
    })
}

/// Simulates `n` replicates at `sites` into `out`, row-major `n x p`.
///
/// # Safety
/// Handles must be live and `out` must be valid for `out_len` writes.
#[no_mangle]
pub unsafe extern "C" fn maxconv_simulate(
    model: *const MaxconvModel,
    sites: *const MaxconvSites,
    n: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> MaxconvStatus {
    non_null!(model, sites, out);
    guard(|| {
        let s = &(*sites).0;
        if out_len != n * s.len() {
            return Err(Error::Dimension(format!(
                "output holds {out_len} values, need {} x {}",
                n,
                s.len()
            )));
        }
        let m = simulate::simulate_model(&(*model).0, s, n, seed)?;
        let o = std::slice::from_raw_parts_mut(out, out_len);
        for i in 0..n {
            for j in 0..s.len() {
                o[i * s.len() + j] = m[(i, j)];
            }
        }
        Ok(())
    })
}

/// Fits `family` to row-major `n x p` data by weighted pairwise likelihood with the
/// default parameter boxes for a domain of linear size `scale`. Data are rank
/// transformed per column.
///
/// # Safety
/// `data` must hold `n * p` doubles where `p` is the number of sites; `out` must be
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn maxconv_fit(
    data: *const f64,
    n: usize,
    sites: *const MaxconvSites,
    family: MaxconvFamily,
    d_max: f64,
    scale: f64,
    seed: u64,
    out: *mut *mut MaxconvFit,
) -> MaxconvStatus {
    non_null!(data, sites, out);
    guard(|| {
        let s = &(*sites).0;
        let p = s.len();
        let v = std::slice::from_raw_parts(data, n * p);
        let m = DMatrix::from_fn(n, p, |i, j| v[i * p + j]);
        let u = rank_transform(&m, s.ids.clone())?;
        let f = match family {
            MaxconvFamily::M1 => Family::M1,
            MaxconvFamily::M2 => Family::M2,
            MaxconvFamily::M3 => Family::M3,
            MaxconvFamily::M4 => Family::M4,
            MaxconvFamily::M5 => Family::M5,
        };
        let spec = FitSpec::default_for(f, scale);
        let fit = fit_model(&u, s, &spec, &PairWeightRule::new(d_max)?, seed)?;
        *out = Box::into_raw(Box::new(MaxconvFit(fit)));
        Ok(())
    })
}

/// Maximised pairwise log-likelihood.
///
/// # Safety
/// `fit` must be a live handle and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn maxconv_fit_objective(
    fit: *const MaxconvFit,
    out: *mut f64,
) -> MaxconvStatus {
    non_null!(fit, out);
    guard(|| {
        *out = (*fit).0.objective;
        Ok(())
    })
}

/// Fitted model as a new handle.
///
/// # Safety
/// `fit` must be a live handle and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn maxconv_fit_model(
    fit: *const MaxconvFit,
    out: *mut *mut MaxconvModel,
) -> MaxconvStatus {
    non_null!(fit, out);
    guard(|| store_model((*fit).0.params, out))
}

/// Full fit report as JSON. Free the string with [`maxconv_string_free`].
///
/// # Safety
/// `fit` must be a live handle and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn maxconv_fit_to_json(
    fit: *const MaxconvFit,
    out: *mut *mut c_char,
) -> MaxconvStatus {
    non_null!(fit, out);
    guard(|| {
        *out = CString::new((*fit).0.to_json()?)
            .unwrap_or_default()
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a fit handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn maxconv_fit_free(fit: *mut MaxconvFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn maxconv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
