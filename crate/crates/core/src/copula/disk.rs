//! Copula of the max-convolution process at two sites: distribution function, first
//! partials and density.
//!
//! With `E_i = u_i^(-delta_i)` the copula is `u1 u2 [ int E1 g + int_R (E2 - E1) g ]`,
//! where `R = { r1 < l r2 }`, `l = sqrt(ln u1 / ln u2)`, is the part of the radius square
//! on which `u1^delta1 < u2^delta2`. Inputs are ordered so that `u1 >= u2`, which puts
//! `R` inside the wedge `r1 < r2`. The density picks up a boundary term from the
//! dependence of `l` on `u2`.

use crate::error::{check_unit_open, Error, Result};
use crate::geometry::overlap_fractions_unchecked;
use crate::numerics::GaussLegendre;
use crate::randomfields::RadiusSpec;

use super::wedge::{Node, Wedge};

/// Default Gauss–Legendre order.
pub const DEFAULT_ORDER: usize = 35;

pub(crate) const U_CLAMP: f64 = 1e-12;

/// Distribution function, partials and density at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaPoint {
    pub cdf: f64,
    pub du1: f64,
    pub du2: f64,
    /// `None` where the copula has no density.
    pub pdf: Option<f64>,
}

#[derive(Debug, Clone)]
enum Regime {
    Independent,
    Comonotone,
    MarshallOlkin {
        delta: f64,
    },
    /// Equal radii: nodes `(weight, delta)` of a one-dimensional Marshall–Olkin mixture.
    Radial {
        nodes: Vec<(f64, f64)>,
    },
    Mixture {
        wedge: Wedge,
    },
}

/// Copula of `(Z(s1), Z(s2))` at distance `h`.
#[derive(Debug, Clone)]
pub struct DiskCopula {
    spec: RadiusSpec,
    h: f64,
    regime: Regime,
    rule: GaussLegendre,
    full: Vec<Node>,
}

impl DiskCopula {
    pub fn new(spec: &RadiusSpec, h: f64, order: usize) -> Result<Self> {
        spec.validate()?;
        if !(h >= 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "distance must be finite and non-negative, got {h}"
            )));
        }
        let rule = GaussLegendre::new(order)?;
        let regime = if h >= 2.0 * spec.r_upper {
            Regime::Independent
        } else if h == 0.0 {
            Regime::Comonotone
        } else if spec.r_lower == spec.r_upper {
            let r = spec.r_upper;
            Regime::MarshallOlkin {
                delta: overlap_fractions_unchecked(r, r, h).0,
            }
        } else if spec.cov.correlation(h) >= 1.0 - 1e-12 {
            Regime::Radial {
                nodes: radial_nodes(spec, h, &rule),
            }
        } else {
            Regime::Mixture {
                wedge: Wedge::new(spec, h),
            }
        };
        let mut full = Vec::new();
        if let Regime::Mixture { wedge } = &regime {
            wedge.region(1.0, &rule, &rule, &mut full);
        }
        Ok(DiskCopula {
            spec: *spec,
            h,
            regime,
            rule,
            full,
        })
    }

    pub fn spec(&self) -> &RadiusSpec {
        &self.spec
    }

    pub fn distance(&self) -> f64 {
        self.h
    }

    pub(crate) fn is_mixture(&self) -> bool {
        matches!(self.regime, Regime::Mixture { .. })
    }

    pub fn has_density(&self) -> bool {
        matches!(self.regime, Regime::Independent | Regime::Mixture { .. })
    }

    pub fn cdf(&self, u1: f64, u2: f64) -> Result<f64> {
        Ok(self.eval(u1, u2)?.cdf)
    }

    pub fn partials(&self, u1: f64, u2: f64) -> Result<(f64, f64)> {
        let p = self.eval_partials(u1, u2)?;
        Ok((p.du1, p.du2))
    }

    pub fn pdf(&self, u1: f64, u2: f64) -> Result<f64> {
        self.eval(u1, u2)?.pdf.ok_or_else(|| {
            Error::NoDensity(format!(
                "degenerate radius or coincident sites (h = {})",
                self.h
            ))
        })
    }

    fn eval_partials(&self, u1: f64, u2: f64) -> Result<CopulaPoint> {
        self.eval(u1, u2)
    }

    /// All quantities at `(u1, u2)`; inputs must lie in `(0, 1)` and are clamped to
    /// `[1e-12, 1 - 1e-12]`.
    pub fn eval(&self, u1: f64, u2: f64) -> Result<CopulaPoint> {
        check_unit_open("u1", u1)?;
        check_unit_open("u2", u2)?;
        let u1 = u1.clamp(U_CLAMP, 1.0 - U_CLAMP);
        let u2 = u2.clamp(U_CLAMP, 1.0 - U_CLAMP);
        match &self.regime {
            Regime::Independent => Ok(CopulaPoint {
                cdf: u1 * u2,
                du1: u2,
                du2: u1,
                pdf: Some(1.0),
            }),
            Regime::Comonotone => {
                let (du1, du2) = if u1 < u2 {
                    (1.0, 0.0)
                } else if u1 > u2 {
                    (0.0, 1.0)
                } else {
                    (0.5, 0.5)
                };
                Ok(CopulaPoint {
                    cdf: u1.min(u2),
                    du1,
                    du2,
                    pdf: None,
                })
            }
            Regime::MarshallOlkin { delta } => Ok(marshall_olkin(u1, u2, *delta, *delta)),
            Regime::Radial { nodes } => {
                let mut p = CopulaPoint {
                    cdf: 0.0,
                    du1: 0.0,
                    du2: 0.0,
                    pdf: None,
                };
                for &(w, d) in nodes {
                    let m = marshall_olkin(u1, u2, d, d);
                    p.cdf += w * m.cdf;
                    p.du1 += w * m.du1;
                    p.du2 += w * m.du2;
                }
                Ok(p)
            }
            Regime::Mixture { wedge } => Ok(self.eval_mixture(wedge, u1, u2)),
        }
    }

    fn eval_mixture(&self, wedge: &Wedge, u1: f64, u2: f64) -> CopulaPoint {
        let swapped = u1 < u2;
        let (a, b) = if swapped { (u2, u1) } else { (u1, u2) };
        let (ua, ub) = (-a.ln(), -b.ln());
        let ell = (ua / ub).sqrt().min(1.0);

        let (mut s0, mut s1) = (0.0, 0.0);
        for n in &self.full {
            let e1 = (n.d1 * ua).exp();
            let e2 = (n.d2 * ua).exp();
            s0 += n.w * (e1 + e2);
            s1 += n.w * (n.d1 * e1 + n.d2 * e2);
        }

        let mut nodes = Vec::new();
        wedge.region(wedge.tau_of_t(ell), &self.rule, &self.rule, &mut nodes);
        let (mut ic, mut i1, mut i2, mut ip) = (0.0, 0.0, 0.0, 0.0);
        for n in &nodes {
            let e1 = (n.d1 * ua).exp();
            let e2 = (n.d2 * ub).exp();
            ic += n.w * (e2 - e1);
            i1 += n.w * (e2 - e1 + n.d1 * e1);
            i2 += n.w * (e2 - n.d2 * e2 - e1);
            ip += n.w * (e2 - n.d2 * e2 - e1 + n.d1 * e1);
        }

        wedge.line(ell, &self.rule, &mut nodes);
        // on the boundary E1 = E2, so the integrand reduces to b delta1 E1
        let hb: f64 = nodes
            .iter()
            .map(|n| n.w * n.d1 * (n.d1 * ua).exp())
            .sum::<f64>()
            * b;

        let cdf = a * b * (s0 + ic);
        let da = b * (s0 - s1 + i1);
        let db = a * (s0 + i2);
        let pdf = s0 - s1 + ip + ell / (2.0 * b * ub) * hb;
        let (du1, du2) = if swapped { (db, da) } else { (da, db) };
        CopulaPoint {
            cdf: cdf.clamp(0.0, a.min(b)),
            du1,
            du2,
            pdf: Some(pdf),
        }
    }
}

/// Uniform law of a common radius on `(r_lower, r_upper)`, split where the disks start to meet.
pub(crate) fn radial_nodes(spec: &RadiusSpec, h: f64, rule: &GaussLegendre) -> Vec<(f64, f64)> {
    let (lo, hi) = (spec.r_lower, spec.r_upper);
    let mut breaks = vec![lo];
    if h / 2.0 > lo && h / 2.0 < hi {
        breaks.push(h / 2.0);
    }
    breaks.push(hi);
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        for (r, wr) in rule.mapped(w[0], w[1]) {
            out.push((wr / (hi - lo), overlap_fractions_unchecked(r, r, h).0));
        }
    }
    out
}

/// Marshall–Olkin copula `min(u1 u2^(1 - d2), u2 u1^(1 - d1))` and its partials.
pub fn marshall_olkin(u1: f64, u2: f64, d1: f64, d2: f64) -> CopulaPoint {
    let a = u1 * u2.powf(1.0 - d2);
    let b = u2 * u1.powf(1.0 - d1);
    if a <= b {
        CopulaPoint {
            cdf: a,
            du1: u2.powf(1.0 - d2),
            du2: (1.0 - d2) * u1 * u2.powf(-d2),
            pdf: None,
        }
    } else {
        CopulaPoint {
            cdf: b,
            du1: (1.0 - d1) * u2 * u1.powf(-d1),
            du2: u1.powf(1.0 - d1),
            pdf: None,
        }
    }
}

/// Copula distribution function of the disk model.
pub fn copula_cdf(u1: f64, u2: f64, h: f64, spec: &RadiusSpec, order: usize) -> Result<f64> {
    DiskCopula::new(spec, h, order)?.cdf(u1, u2)
}

/// Copula density of the disk model.
pub fn copula_pdf(u1: f64, u2: f64, h: f64, spec: &RadiusSpec, order: usize) -> Result<f64> {
    DiskCopula::new(spec, h, order)?.pdf(u1, u2)
}

/// First partial derivatives of the disk-model copula.
pub fn copula_partials(
    u1: f64,
    u2: f64,
    h: f64,
    spec: &RadiusSpec,
    order: usize,
) -> Result<(f64, f64)> {
    DiskCopula::new(spec, h, order)?.partials(u1, u2)
}
