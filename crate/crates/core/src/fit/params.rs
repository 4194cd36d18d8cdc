//! Named parameters of each model family, box bounds and unconstrained transforms.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::copula::{Family, MixtureParams, ModelParams};
use crate::error::{invalid, Result};
use crate::randomfields::{CompanionSpec, CovarianceSpec, RadiusSpec};

/// Parameter identifiers shared by all families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    /// Range of the Gaussian or t correlation (M1, M2).
    Theta,
    /// Smoothness of the Gaussian or t correlation.
    Alpha,
    /// Degrees of freedom (M2, M5).
    Nu,
    RLower,
    RUpper,
    ThetaR,
    AlphaR,
    ThetaY,
    AlphaY,
    Q,
    /// Fréchet shape of the companion (M5).
    Beta,
}

impl ParamName {
    pub fn label(&self) -> &'static str {
        match self {
            ParamName::Theta => "theta",
            ParamName::Alpha => "alpha",
            ParamName::Nu => "nu",
            ParamName::RLower => "r_lower",
            ParamName::RUpper => "r_upper",
            ParamName::ThetaR => "theta_r",
            ParamName::AlphaR => "alpha_r",
            ParamName::ThetaY => "theta_y",
            ParamName::AlphaY => "alpha_y",
            ParamName::Q => "q",
            ParamName::Beta => "beta",
        }
    }

    /// Scaled logit for interval parameters, log for positive ones.
    pub fn transform(&self) -> Transform {
        match self {
            ParamName::Alpha
            | ParamName::AlphaR
            | ParamName::AlphaY
            | ParamName::RLower
            | ParamName::Q => Transform::Logit,
            _ => Transform::Log,
        }
    }

    /// Parameters of `family`, in a fixed order.
    pub fn of(family: Family) -> &'static [ParamName] {
        use ParamName::*;
        match family {
            Family::M1 => &[Theta, Alpha],
            Family::M2 => &[Theta, Alpha, Nu],
            Family::M3 => &[RLower, RUpper, ThetaR, AlphaR],
            Family::M4 => &[RLower, RUpper, ThetaR, AlphaR, ThetaY, AlphaY, Q],
            Family::M5 => &[RLower, RUpper, ThetaR, AlphaR, ThetaY, AlphaY, Q, Nu, Beta],
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Log,
    Logit,
}

/// A free parameter and its box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeParam {
    pub name: ParamName,
    pub lower: f64,
    pub upper: f64,
}

impl FreeParam {
    pub fn new(name: ParamName, lower: f64, upper: f64) -> Self {
        FreeParam { name, lower, upper }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return invalid(format!(
                "bounds of {} must be finite and ordered, got [{}, {}]",
                self.name, self.lower, self.upper
            ));
        }
        if self.name.transform() == Transform::Log && self.lower <= 0.0 {
            return invalid(format!(
                "{} is positive; its lower bound must exceed 0",
                self.name
            ));
        }
        Ok(())
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    /// Maps a value of the box to the real line.
    pub fn to_free(&self, v: f64) -> f64 {
        match self.name.transform() {
            Transform::Log => v.ln(),
            Transform::Logit => {
                let p = (v - self.lower) / (self.upper - self.lower);
                p.ln() - (-p).ln_1p()
            }
        }
    }

    /// Inverse of [`FreeParam::to_free`]; log-scale values are projected onto the box.
    pub fn from_free(&self, x: f64) -> f64 {
        match self.name.transform() {
            Transform::Log => x.exp().clamp(self.lower, self.upper),
            Transform::Logit => {
                let p = if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                };
                (self.lower + (self.upper - self.lower) * p).clamp(self.lower, self.upper)
            }
        }
    }
}

fn cov(range: f64, alpha: f64) -> CovarianceSpec {
    if alpha == 1.0 {
        CovarianceSpec::exponential(range)
    } else {
        CovarianceSpec::powered(range, alpha)
    }
}

fn get(values: &BTreeMap<ParamName, f64>, name: ParamName) -> Result<f64> {
    match values.get(&name) {
        Some(v) => Ok(*v),
        None => invalid(format!("missing parameter {name}")),
    }
}

/// Builds and validates the parameter record of `family` from named values.
pub fn assemble(family: Family, values: &BTreeMap<ParamName, f64>) -> Result<ModelParams> {
    use ParamName::*;
    let v = |n| get(values, n);
    let radius = || -> Result<RadiusSpec> {
        Ok(RadiusSpec {
            r_lower: v(RLower)?,
            r_upper: v(RUpper)?,
            cov: cov(v(ThetaR)?, v(AlphaR)?),
        })
    };
    let p = match family {
        Family::M1 => ModelParams::M1 {
            cov: cov(v(Theta)?, v(Alpha)?),
        },
        Family::M2 => ModelParams::M2 {
            cov: cov(v(Theta)?, v(Alpha)?),
            nu: v(Nu)?,
        },
        Family::M3 => ModelParams::M3 { radius: radius()? },
        Family::M4 => ModelParams::M4(MixtureParams {
            radius: radius()?,
            q: v(Q)?,
            companion: CompanionSpec::Gaussian {
                cov: cov(v(ThetaY)?, v(AlphaY)?),
            },
        }),
        Family::M5 => ModelParams::M5(MixtureParams {
            radius: radius()?,
            q: v(Q)?,
            companion: CompanionSpec::StudentFrechet {
                cov: cov(v(ThetaY)?, v(AlphaY)?),
                nu: v(Nu)?,
                beta: v(Beta)?,
            },
        }),
    };
    p.validate()?;
    Ok(p)
}

/// Named values of a parameter record.
pub fn decompose(params: &ModelParams) -> BTreeMap<ParamName, f64> {
    use ParamName::*;
    let mut out = BTreeMap::new();
    let radius = |r: &RadiusSpec, out: &mut BTreeMap<ParamName, f64>| {
        out.insert(RLower, r.r_lower);
        out.insert(RUpper, r.r_upper);
        out.insert(ThetaR, r.cov.range);
        out.insert(AlphaR, r.cov.alpha());
    };
    match params {
        ModelParams::M1 { cov } => {
            out.insert(Theta, cov.range);
            out.insert(Alpha, cov.alpha());
        }
        ModelParams::M2 { cov, nu } => {
            out.insert(Theta, cov.range);
            out.insert(Alpha, cov.alpha());
            out.insert(Nu, *nu);
        }
        ModelParams::M3 { radius: r } => radius(r, &mut out),
        ModelParams::M4(m) | ModelParams::M5(m) => {
            radius(&m.radius, &mut out);
            out.insert(Q, m.q);
            let c = m.companion.cov();
            out.insert(ThetaY, c.range);
            out.insert(AlphaY, c.alpha());
            if let CompanionSpec::StudentFrechet { nu, beta, .. } = m.companion {
                out.insert(Nu, nu);
                out.insert(Beta, beta);
            }
        }
    }
    out
}
