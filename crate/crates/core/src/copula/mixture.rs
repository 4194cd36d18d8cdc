//! Max-mixture `max{q Z, (1 - q) Y}`: marginal law, companion pair and copula.
//!
//! The joint distribution factorises as `C_Z(e^(-q/z1), e^(-q/z2)) F_Y(z1/(1-q), z2/(1-q))`.
//! The copula follows by evaluating it at the marginal quantiles; the density is the
//! mixed partial of that product divided by the two marginal densities.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_open, invalid, Error, Result};
use crate::numerics::dist::{
    bvn_cdf_fast, bvt_cdf, bvt_cdf_int, gaussian_copula_ln_density, norm_cdf, norm_pdf,
    t_conditional_cdf, t_copula_ln_density, t_quantile,
};
use crate::randomfields::{CompanionSpec, RadiusSpec};

use super::disk::{CopulaPoint, DiskCopula, U_CLAMP};

/// Parameters of the max-mixture process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub radius: RadiusSpec,
    pub q: f64,
    pub companion: CompanionSpec,
}

impl MixtureParams {
    pub fn validate(&self) -> Result<()> {
        self.radius.validate()?;
        self.marginal()?;
        Ok(())
    }

    pub fn marginal(&self) -> Result<MixtureMarginal> {
        MixtureMarginal::new(self.q, self.companion)
    }
}

/// Marginal law `F(z) = exp(-q/z) F_Y(z / (1 - q))` of the max-mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureMarginal {
    pub q: f64,
    pub companion: CompanionSpec,
}

impl MixtureMarginal {
    pub fn new(q: f64, companion: CompanionSpec) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return invalid(format!("mixing weight q must lie in (0, 1], got {q}"));
        }
        companion.validate()?;
        Ok(MixtureMarginal { q, companion })
    }

    fn pure(&self) -> bool {
        self.q >= 1.0
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if !(z > 0.0) {
            return 0.0;
        }
        if z == f64::INFINITY {
            return 1.0;
        }
        let a = (-self.q / z).exp();
        if self.pure() {
            a
        } else {
            a * self.companion.cdf(z / (1.0 - self.q))
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        if !(z > 0.0 && z.is_finite()) {
            return 0.0;
        }
        let a = (-self.q / z).exp();
        if self.pure() {
            return self.q / (z * z) * a;
        }
        let y = z / (1.0 - self.q);
        self.q / (z * z) * a * self.companion.cdf(y) + a * self.companion.pdf(y) / (1.0 - self.q)
    }

    /// Quantile by bracketing and bisection to a relative width of `1e-14`.
    pub fn inv(&self, u: f64) -> Result<f64> {
        check_unit_open("u", u)?;
        if self.pure() {
            return Ok(-self.q / u.ln());
        }
        // exp(-q/z) >= F(z) gives a lower bracket; grow the upper one
        let lo0 = -self.q / u.ln();
        let mut hi = lo0.max(1e-300);
        let mut n = 0;
        while self.cdf(hi) < u {
            hi *= 2.0;
            n += 1;
            if n > 200 {
                return Err(Error::NoFiniteRoot(format!(
                    "mixture quantile at u = {u} not bracketed after 200 doublings"
                )));
            }
        }
        let mut lo = lo0.min(hi);
        while self.cdf(lo) > u && lo > 0.0 {
            lo *= 0.5;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-14 * hi || mid == lo || mid == hi {
                break;
            }
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Law of `(Y(s1), Y(s2))` at a fixed distance.
#[derive(Debug, Clone, Copy)]
pub struct CompanionPair {
    spec: CompanionSpec,
    rho: f64,
}

/// Marginal quantities of one companion value: score on the Gaussian or t scale and
/// marginal cdf and density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompanionMargin {
    pub score: f64,
    pub cdf: f64,
    pub pdf: f64,
}

impl CompanionPair {
    pub fn new(spec: &CompanionSpec, h: f64) -> Result<Self> {
        spec.validate()?;
        let rho = spec.cov().correlation(h);
        if rho >= 1.0 - 1e-12 {
            return Err(Error::NoDensity(format!(
                "companion pair at distance {h} is degenerate"
            )));
        }
        Ok(CompanionPair { spec: *spec, rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Score and marginal quantities of `y`.
    pub fn margin(spec: &CompanionSpec, y: f64) -> CompanionMargin {
        match *spec {
            CompanionSpec::Gaussian { .. } => CompanionMargin {
                score: y,
                cdf: norm_cdf(y),
                pdf: norm_pdf(y),
            },
            CompanionSpec::StudentFrechet { nu, .. } => {
                let cdf = spec.cdf(y);
                let score = if cdf <= 0.0 {
                    f64::NEG_INFINITY
                } else if cdf >= 1.0 {
                    f64::INFINITY
                } else {
                    t_quantile(cdf, nu)
                };
                CompanionMargin {
                    score,
                    cdf,
                    pdf: spec.pdf(y),
                }
            }
        }
    }

    /// Joint cdf, its two first partials and the joint density.
    pub fn eval(&self, m1: &CompanionMargin, m2: &CompanionMargin) -> Result<[f64; 4]> {
        if m1.cdf <= 0.0 || m2.cdf <= 0.0 {
            return Ok([0.0; 4]);
        }
        let (x1, x2) = (m1.score, m2.score);
        match self.spec {
            CompanionSpec::Gaussian { .. } => {
                let s = (1.0 - self.rho * self.rho).sqrt();
                let cdf = bvn_cdf_fast(x1, x2, self.rho);
                let p1 = m1.pdf * norm_cdf((x2 - self.rho * x1) / s);
                let p2 = m2.pdf * norm_cdf((x1 - self.rho * x2) / s);
                let pdf = if x1.is_finite() && x2.is_finite() {
                    joint_density(gaussian_copula_ln_density(x1, x2, self.rho), m1, m2)
                } else {
                    0.0
                };
                Ok([cdf, p1, p2, pdf])
            }
            CompanionSpec::StudentFrechet { nu, .. } => {
                let cdf = if x1 == f64::INFINITY {
                    m2.cdf
                } else if x2 == f64::INFINITY {
                    m1.cdf
                } else if nu.fract() == 0.0 && nu <= 50.0 {
                    bvt_cdf_int(nu as u32, x1, x2, self.rho)
                } else {
                    bvt_cdf(x1, x2, self.rho, nu)?
                };
                let finite = x1.is_finite() && x2.is_finite();
                let p1 = if x1.is_finite() {
                    m1.pdf * t_conditional_cdf(x1, x2, self.rho, nu)
                } else {
                    0.0
                };
                let p2 = if x2.is_finite() {
                    m2.pdf * t_conditional_cdf(x2, x1, self.rho, nu)
                } else {
                    0.0
                };
                let pdf = if finite {
                    joint_density(t_copula_ln_density(x1, x2, self.rho, nu), m1, m2)
                } else {
                    0.0
                };
                Ok([cdf, p1, p2, pdf])
            }
        }
    }
}

/// Copula density times both margins, combined on the log scale so that a large copula
/// density never meets a vanishing marginal density.
fn joint_density(ln_c: f64, m1: &CompanionMargin, m2: &CompanionMargin) -> f64 {
    if m1.pdf <= 0.0 || m2.pdf <= 0.0 {
        return 0.0;
    }
    (ln_c + m1.pdf.ln() + m2.pdf.ln()).exp()
}

/// Copula of the max-mixture at distance `h`.
#[derive(Debug, Clone)]
pub struct MixtureCopula {
    disk: DiskCopula,
    marginal: MixtureMarginal,
    pair: Option<CompanionPair>,
}

/// Copula value and density of the max-mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixturePoint {
    pub cdf: f64,
    pub pdf: Option<f64>,
}

impl MixtureCopula {
    pub fn new(params: &MixtureParams, h: f64, order: usize) -> Result<Self> {
        params.validate()?;
        let disk = DiskCopula::new(&params.radius, h, order)?;
        let marginal = params.marginal()?;
        let pair = if marginal.pure() {
            None
        } else {
            Some(CompanionPair::new(&params.companion, h)?)
        };
        Ok(MixtureCopula {
            disk,
            marginal,
            pair,
        })
    }

    pub fn disk(&self) -> &DiskCopula {
        &self.disk
    }

    pub fn marginal(&self) -> &MixtureMarginal {
        &self.marginal
    }

    pub fn cdf(&self, u1: f64, u2: f64) -> Result<f64> {
        Ok(self.eval(u1, u2)?.cdf)
    }

    pub fn pdf(&self, u1: f64, u2: f64) -> Result<f64> {
        self.eval(u1, u2)?
            .pdf
            .ok_or_else(|| Error::NoDensity("disk component has no density".into()))
    }

    pub fn eval(&self, u1: f64, u2: f64) -> Result<MixturePoint> {
        check_unit_open("u1", u1)?;
        check_unit_open("u2", u2)?;
        let Some(pair) = &self.pair else {
            let p = self.disk.eval(u1, u2)?;
            return Ok(MixturePoint {
                cdf: p.cdf,
                pdf: p.pdf,
            });
        };
        let u1 = u1.clamp(U_CLAMP, 1.0 - U_CLAMP);
        let u2 = u2.clamp(U_CLAMP, 1.0 - U_CLAMP);
        let z1 = self.marginal.inv(u1)?;
        let z2 = self.marginal.inv(u2)?;
        let q = self.marginal.q;
        let m1 = CompanionPair::margin(&self.marginal.companion, z1 / (1.0 - q));
        let m2 = CompanionPair::margin(&self.marginal.companion, z2 / (1.0 - q));
        let f1 = self.marginal.pdf(z1);
        let f2 = self.marginal.pdf(z2);
        let zp = self.disk.eval(
            (-q / z1).exp().clamp(U_CLAMP, 1.0 - U_CLAMP),
            (-q / z2).exp().clamp(U_CLAMP, 1.0 - U_CLAMP),
        )?;
        let y = pair.eval(&m1, &m2)?;
        combine(q, [z1, z2], [f1, f2], &zp, &y)
    }
}

/// Assembles the mixture copula from the disk copula at `exp(-q/z_i)` and the companion
/// pair at `z_i / (1 - q)`. `y` holds the companion cdf, its partials and density.
pub(crate) fn combine(
    q: f64,
    z: [f64; 2],
    f: [f64; 2],
    zp: &CopulaPoint,
    y: &[f64; 4],
) -> Result<MixturePoint> {
    let cdf = zp.cdf * y[0];
    let Some(cz) = zp.pdf else {
        return Ok(MixturePoint { cdf, pdf: None });
    };
    let k = 1.0 / (1.0 - q);
    // d exp(-q/z) / dz
    let dv1 = q / (z[0] * z[0]) * (-q / z[0]).exp();
    let dv2 = q / (z[1] * z[1]) * (-q / z[1]).exp();
    let joint = cz * dv1 * dv2 * y[0]
        + zp.du1 * dv1 * y[2] * k
        + zp.du2 * dv2 * y[1] * k
        + zp.cdf * y[3] * k * k;
    let pdf = joint / (f[0] * f[1]);
    if !pdf.is_finite() {
        return Err(Error::Numeric(format!(
            "mixture density is not finite at z = ({}, {})",
            z[0], z[1]
        )));
    }
    Ok(MixturePoint {
        cdf: cdf.clamp(0.0, 1.0),
        pdf: Some(pdf.max(0.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomfields::CovarianceSpec;

    fn gaussian_params(q: f64) -> MixtureParams {
        MixtureParams {
            radius: RadiusSpec::new(0.0, 0.4, CovarianceSpec::exponential(0.25)).unwrap(),
            q,
            companion: CompanionSpec::Gaussian {
                cov: CovarianceSpec::exponential(0.5),
            },
        }
    }

    #[test]
    fn marginal_reference_values() {
        let m = MixtureMarginal::new(
            0.2,
            CompanionSpec::Gaussian {
                cov: CovarianceSpec::exponential(0.5),
            },
        )
        .unwrap();
        let expect = (-0.2f64).exp() * norm_cdf(1.25);
        assert!((m.cdf(1.0) - expect).abs() < 1e-15);
        assert!((expect - 0.73224).abs() < 1e-5);
        assert!((m.inv(expect).unwrap() - 1.0).abs() < 1e-12);
        let pure = MixtureMarginal::new(1.0, m.companion).unwrap();
        assert!((pure.inv(0.5).unwrap() - 1.0 / 2f64.ln()).abs() < 1e-12);
        assert!(MixtureMarginal::new(0.0, m.companion).is_err());
        assert!(MixtureMarginal::new(2.0, m.companion).is_err());
    }

    #[test]
    fn marginal_density_and_round_trip() {
        let companions = [
            CompanionSpec::Gaussian {
                cov: CovarianceSpec::exponential(0.5),
            },
            CompanionSpec::StudentFrechet {
                cov: CovarianceSpec::exponential(0.5),
                nu: 3.0,
                beta: 1.2,
            },
        ];
        for c in companions {
            let m = MixtureMarginal::new(0.2, c).unwrap();
            for z in [0.05, 0.3, 1.0, 4.0, 30.0] {
                let e = 1e-6 * z;
                let fd = (m.cdf(z + e) - m.cdf(z - e)) / (2.0 * e);
                assert!((fd - m.pdf(z)).abs() < 1e-6 * (1.0 + m.pdf(z)), "z={z}");
            }
            for i in 1..1000 {
                let u = i as f64 / 1000.0;
                assert!((m.cdf(m.inv(u).unwrap()) - u).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn q_one_reduces_to_disk() {
        let p = gaussian_params(1.0);
        let m = MixtureCopula::new(&p, 0.1, 35).unwrap();
        let d = DiskCopula::new(&p.radius, 0.1, 35).unwrap();
        for (a, b) in [(0.3, 0.6), (0.9, 0.2)] {
            assert_eq!(m.cdf(a, b).unwrap(), d.cdf(a, b).unwrap());
            assert_eq!(m.pdf(a, b).unwrap(), d.pdf(a, b).unwrap());
        }
    }

    #[test]
    fn independent_components_give_product() {
        let mut p = gaussian_params(0.2);
        p.companion = CompanionSpec::Gaussian {
            cov: CovarianceSpec::exponential(1e-3),
        };
        let m = MixtureCopula::new(&p, 0.9, 35).unwrap();
        for (a, b) in [(0.3, 0.6), (0.9, 0.2), (0.05, 0.5)] {
            assert!((m.cdf(a, b).unwrap() - a * b).abs() < 1e-10);
            assert!((m.pdf(a, b).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn density_matches_mixed_difference() {
        let mut t = gaussian_params(0.2);
        t.companion = CompanionSpec::StudentFrechet {
            cov: CovarianceSpec::exponential(0.5),
            nu: 3.0,
            beta: 1.2,
        };
        for p in [gaussian_params(0.2), t] {
            let m = MixtureCopula::new(&p, 0.15, 35).unwrap();
            let e = 1e-4;
            for (a, b) in [(0.3, 0.6), (0.8, 0.25), (0.55, 0.9)] {
                let fd = (m.cdf(a + e, b + e).unwrap()
                    - m.cdf(a + e, b - e).unwrap()
                    - m.cdf(a - e, b + e).unwrap()
                    + m.cdf(a - e, b - e).unwrap())
                    / (4.0 * e * e);
                let pdf = m.pdf(a, b).unwrap();
                assert!((fd - pdf).abs() < 2e-3, "({a},{b}) fd={fd} pdf={pdf}");
            }
        }
    }
}
