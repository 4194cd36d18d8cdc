//! The five model families and a uniform evaluator for one pair of sites.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::randomfields::{CompanionSpec, CovarianceSpec, RadiusSpec};

use super::disk::DiskCopula;
use super::mixture::{MixtureCopula, MixtureParams};
use super::reference::{reference_copula_cdf, reference_copula_ln_pdf, ReferenceFamily};

/// Model identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    /// Gaussian copula.
    M1,
    /// Student-t copula.
    M2,
    /// Max-convolution with random disks.
    M3,
    /// Max-mixture with a Gaussian companion.
    M4,
    /// Max-mixture with a Student-t/Fréchet companion.
    M5,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::M1, Family::M2, Family::M3, Family::M4, Family::M5];

    pub fn label(&self) -> &'static str {
        match self {
            Family::M1 => "M1",
            Family::M2 => "M2",
            Family::M3 => "M3",
            Family::M4 => "M4",
            Family::M5 => "M5",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        Family::ALL
            .into_iter()
            .find(|f| f.label() == t)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model family '{s}'")))
    }
}

/// Parameters of one model family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum ModelParams {
    M1 { cov: CovarianceSpec },
    M2 { cov: CovarianceSpec, nu: f64 },
    M3 { radius: RadiusSpec },
    M4(MixtureParams),
    M5(MixtureParams),
}

impl ModelParams {
    pub fn family(&self) -> Family {
        match self {
            ModelParams::M1 { .. } => Family::M1,
            ModelParams::M2 { .. } => Family::M2,
            ModelParams::M3 { .. } => Family::M3,
            ModelParams::M4(_) => Family::M4,
            ModelParams::M5(_) => Family::M5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::M1 { cov } => cov.validate(),
            ModelParams::M2 { cov, nu } => {
                cov.validate()?;
                if !(*nu > 0.0 && nu.is_finite()) {
                    return invalid(format!("degrees of freedom must be positive, got {nu}"));
                }
                Ok(())
            }
            ModelParams::M3 { radius } => radius.validate(),
            ModelParams::M4(p) => {
                if !matches!(p.companion, CompanionSpec::Gaussian { .. }) {
                    return invalid("M4 requires a Gaussian companion");
                }
                p.validate()
            }
            ModelParams::M5(p) => {
                if !matches!(p.companion, CompanionSpec::StudentFrechet { .. }) {
                    return invalid("M5 requires a Student-t/Fréchet companion");
                }
                p.validate()
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Reference { rho: f64, family: ReferenceFamily },
    Disk(DiskCopula),
    Mixture(MixtureCopula),
}

/// Copula of one model family at a fixed distance.
#[derive(Debug, Clone)]
pub struct PairCopula {
    params: ModelParams,
    h: f64,
    inner: Inner,
}

impl PairCopula {
    pub fn new(params: &ModelParams, h: f64, order: usize) -> Result<Self> {
        if !(h >= 0.0 && h.is_finite()) {
            return invalid(format!("distance must be finite and non-negative, got {h}"));
        }
        params.validate()?;
        let inner = match params {
            ModelParams::M1 { cov } => Inner::Reference {
                rho: cov.correlation(h),
                family: ReferenceFamily::Gaussian,
            },
            ModelParams::M2 { cov, nu } => Inner::Reference {
                rho: cov.correlation(h),
                family: ReferenceFamily::Student { nu: *nu },
            },
            ModelParams::M3 { radius } => Inner::Disk(DiskCopula::new(radius, h, order)?),
            ModelParams::M4(p) | ModelParams::M5(p) => {
                Inner::Mixture(MixtureCopula::new(p, h, order)?)
            }
        };
        Ok(PairCopula {
            params: *params,
            h,
            inner,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn distance(&self) -> f64 {
        self.h
    }

    pub fn cdf(&self, u1: f64, u2: f64) -> Result<f64> {
        match &self.inner {
            Inner::Reference { rho, family } => {
                if *rho >= 1.0 - 1e-12 {
                    return Ok(u1.min(u2));
                }
                reference_copula_cdf(u1, u2, *rho, *family)
            }
            Inner::Disk(c) => c.cdf(u1, u2),
            Inner::Mixture(c) => c.cdf(u1, u2),
        }
    }

    pub fn pdf(&self, u1: f64, u2: f64) -> Result<f64> {
        match &self.inner {
            Inner::Reference { .. } => Ok(self.ln_pdf(u1, u2)?.exp()),
            Inner::Disk(c) => c.pdf(u1, u2),
            Inner::Mixture(c) => c.pdf(u1, u2),
        }
    }

    pub fn ln_pdf(&self, u1: f64, u2: f64) -> Result<f64> {
        match &self.inner {
            Inner::Reference { rho, family } => {
                if *rho >= 1.0 - 1e-12 {
                    return Err(Error::NoDensity(format!(
                        "reference copula is comonotone at distance {}",
                        self.h
                    )));
                }
                reference_copula_ln_pdf(u1, u2, *rho, *family)
            }
            _ => Ok(self.pdf(u1, u2)?.ln()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.label().parse::<Family>().unwrap(), f);
        }
        assert!("M9".parse::<Family>().is_err());
        let p = ModelParams::M4(MixtureParams {
            radius: RadiusSpec::new(0.0, 0.4, CovarianceSpec::exponential(0.25)).unwrap(),
            q: 0.2,
            companion: CompanionSpec::Gaussian {
                cov: CovarianceSpec::exponential(0.5),
            },
        });
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<ModelParams>(&s).unwrap(), p);
        let mut bad = p;
        if let ModelParams::M4(m) = &mut bad {
            m.companion = CompanionSpec::StudentFrechet {
                cov: CovarianceSpec::exponential(0.5),
                nu: 4.0,
                beta: 1.0,
            };
        }
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pair_copula_dispatch() {
        let cov = CovarianceSpec::powered(0.3, 1.5);
        let g = PairCopula::new(&ModelParams::M1 { cov }, 0.1, 35).unwrap();
        let rho = cov.correlation(0.1);
        let c = g.pdf(0.5, 0.5).unwrap();
        assert!((c - 1.0 / (1.0 - rho * rho).sqrt()).abs() < 1e-12);
        let d = PairCopula::new(
            &ModelParams::M3 {
                radius: RadiusSpec::new(0.1, 0.4, cov).unwrap(),
            },
            0.9,
            35,
        )
        .unwrap();
        assert!((d.cdf(0.3, 0.4).unwrap() - 0.12).abs() < 1e-12);
        assert!(PairCopula::new(&ModelParams::M1 { cov }, -1.0, 35).is_err());
    }
}
