//! Gaussian and Student-t copulas used as reference models.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_open, invalid, Result};
use crate::numerics::dist::{
    bvn_cdf, bvt_cdf, bvt_cdf_int, gaussian_copula_ln_density, norm_quantile, t_copula_ln_density,
    t_quantile,
};

/// Elliptical reference family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceFamily {
    Gaussian,
    Student { nu: f64 },
}

impl ReferenceFamily {
    fn validate(&self, rho: f64) -> Result<()> {
        if !(rho.abs() < 1.0) {
            return invalid(format!("correlation must lie in (-1, 1), got {rho}"));
        }
        if let ReferenceFamily::Student { nu } = *self {
            if !(nu > 0.0 && nu.is_finite()) {
                return invalid(format!("degrees of freedom must be positive, got {nu}"));
            }
        }
        Ok(())
    }

    fn scores(&self, u1: f64, u2: f64) -> (f64, f64) {
        match *self {
            ReferenceFamily::Gaussian => (norm_quantile(u1), norm_quantile(u2)),
            ReferenceFamily::Student { nu } => (t_quantile(u1, nu), t_quantile(u2, nu)),
        }
    }
}

pub fn reference_copula_ln_pdf(u1: f64, u2: f64, rho: f64, family: ReferenceFamily) -> Result<f64> {
    check_unit_open("u1", u1)?;
    check_unit_open("u2", u2)?;
    family.validate(rho)?;
    let (x1, x2) = family.scores(u1, u2);
    Ok(match family {
        ReferenceFamily::Gaussian => gaussian_copula_ln_density(x1, x2, rho),
        ReferenceFamily::Student { nu } => t_copula_ln_density(x1, x2, rho, nu),
    })
}

pub fn reference_copula_pdf(u1: f64, u2: f64, rho: f64, family: ReferenceFamily) -> Result<f64> {
    Ok(reference_copula_ln_pdf(u1, u2, rho, family)?.exp())
}

pub fn reference_copula_cdf(u1: f64, u2: f64, rho: f64, family: ReferenceFamily) -> Result<f64> {
    check_unit_open("u1", u1)?;
    check_unit_open("u2", u2)?;
    family.validate(rho)?;
    let (x1, x2) = family.scores(u1, u2);
    match family {
        ReferenceFamily::Gaussian => bvn_cdf(x1, x2, rho),
        ReferenceFamily::Student { nu } if nu.fract() == 0.0 && nu <= 50.0 => {
            Ok(bvt_cdf_int(nu as u32, x1, x2, rho))
        }
        ReferenceFamily::Student { nu } => bvt_cdf(x1, x2, rho, nu),
    }
}
