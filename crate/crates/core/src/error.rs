use std::fmt;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no finite root: {0}")]
    NoFiniteRoot(String),
    #[error("no density: {0}")]
    NoDensity(String),
    #[error("ill-conditioned covariance: {0}")]
    IllConditioned(String),
    #[error("raster resolution: {0}")]
    Resolution(String),
    #[error("degenerate seasonal design: {0}")]
    DegenerateSeason(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("date alignment: {0}")]
    Alignment(String),
    #[error("degenerate column: {0}")]
    Degenerate(String),
    #[error("insufficient tail data: {0}")]
    InsufficientTailData(String),
    #[error("insufficient pairs: {0}")]
    InsufficientPairs(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numeric,
    NonConvergence,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_)
            | Error::Domain(_)
            | Error::Resolution(_)
            | Error::DegenerateSeason(_)
            | Error::InsufficientPairs(_)
            | Error::Degenerate(_)
            | Error::Parse(_)
            | Error::Alignment(_)
            | Error::InsufficientTailData(_)
            | Error::Dimension(_)
            | Error::Json(_) => ErrorClass::Validation,
            Error::NoFiniteRoot(_)
            | Error::NoDensity(_)
            | Error::IllConditioned(_)
            | Error::Numeric(_) => ErrorClass::Numeric,
            Error::NonConvergence(_) => ErrorClass::NonConvergence,
            Error::Io(_) | Error::Csv(_) => ErrorClass::Io,
        }
    }

    /// Process exit code: 2 validation, 3 numeric, 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Validation | ErrorClass::Io => 2,
            ErrorClass::Numeric => 3,
            ErrorClass::NonConvergence => 4,
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorClass::Validation => "validation",
            ErrorClass::Numeric => "numeric",
            ErrorClass::NonConvergence => "non-convergence",
            ErrorClass::Io => "io",
        };
        f.write_str(s)
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be finite, got {x}"))
    }
}

pub(crate) fn check_unit_open(name: &str, u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        domain(format!("{name} must lie in (0, 1), got {u}"))
    }
}
