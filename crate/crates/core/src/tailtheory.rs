//! Closed-form and quadrature dependence summaries: upper tail dependence, Spearman's rho,
//! the stable tail-dependence function, tail orders and the max-mixture tail regimes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::copula::disk::radial_nodes;
use crate::copula::wedge::{Node, Wedge};
use crate::error::{invalid, Result};
use crate::geometry::overlap_fractions_unchecked;
use crate::numerics::GaussLegendre;
use crate::randomfields::RadiusSpec;

/// Law of the overlap fractions `(delta1, delta2)` at distance `h`, as weighted nodes
/// `(weight, delta1, delta2, r2 - r1)` whose weights sum to one.
pub fn radius_pair_nodes(spec: &RadiusSpec, h: f64, order: usize) -> Result<Vec<[f64; 4]>> {
    spec.validate()?;
    if !(h >= 0.0 && h.is_finite()) {
        return invalid(format!("distance must be finite and non-negative, got {h}"));
    }
    let rule = GaussLegendre::new(order)?;
    if spec.r_lower == spec.r_upper {
        let d = overlap_fractions_unchecked(spec.r_upper, spec.r_upper, h).0;
        return Ok(vec![[1.0, d, d, 0.0]]);
    }
    if spec.cov.correlation(h) >= 1.0 - 1e-12 {
        return Ok(radial_nodes(spec, h, &rule)
            .into_iter()
            .map(|(w, d)| [w, d, d, 0.0])
            .collect());
    }
    let wedge = Wedge::new(spec, h);
    let mut nodes: Vec<Node> = Vec::new();
    wedge.region(1.0, &rule, &rule, &mut nodes);
    let mut out = Vec::with_capacity(2 * nodes.len());
    for n in nodes {
        out.push([n.w, n.d1, n.d2, n.r2 - n.r1]);
        out.push([n.w, n.d2, n.d1, n.r1 - n.r2]);
    }
    Ok(out)
}

fn expect<F: Fn(f64, f64) -> f64>(nodes: &[[f64; 4]], f: F) -> f64 {
    nodes.iter().map(|n| n[0] * f(n[1], n[2])).sum()
}

/// Upper tail-dependence coefficient `E min(delta1, delta2)`.
pub fn lambda_u(h: f64, spec: &RadiusSpec, order: usize) -> Result<f64> {
    let nodes = radius_pair_nodes(spec, h, order)?;
    Ok(expect(&nodes, f64::min).clamp(0.0, 1.0))
}

fn spearman_integrand(d1: f64, d2: f64) -> f64 {
    if d1 <= 0.0 || d2 <= 0.0 {
        0.0
    } else {
        3.0 / (2.0 / d1 + 2.0 / d2 - 1.0)
    }
}

/// Spearman's rho `E 3 / (2/delta1 + 2/delta2 - 1)`.
pub fn spearman(h: f64, spec: &RadiusSpec, order: usize) -> Result<f64> {
    let nodes = radius_pair_nodes(spec, h, order)?;
    Ok(expect(&nodes, spearman_integrand).clamp(-1.0, 1.0))
}

/// Stable tail-dependence function `w1 + w2 - E min(w1 delta1, w2 delta2)`.
pub fn stdf_disk(w1: f64, w2: f64, h: f64, spec: &RadiusSpec, order: usize) -> Result<f64> {
    if !(w1 >= 0.0 && w2 >= 0.0 && w1.is_finite() && w2.is_finite()) {
        return invalid(format!(
            "stable tail-dependence arguments must be non-negative, got ({w1}, {w2})"
        ));
    }
    let nodes = radius_pair_nodes(spec, h, order)?;
    Ok(w1 + w2 - expect(&nodes, |d1, d2| (w1 * d1).min(w2 * d2)))
}

/// Lower tail order `2 - delta1(r_upper, r_upper; h)`.
pub fn kappa_l(h: f64, spec: &RadiusSpec) -> Result<f64> {
    spec.validate()?;
    if !(h >= 0.0 && h.is_finite()) {
        return invalid(format!("distance must be finite and non-negative, got {h}"));
    }
    Ok(2.0 - overlap_fractions_unchecked(spec.r_upper, spec.r_upper, h).0)
}

/// `P(|R1 - R2| > h)` for the radius pair at distance `h`.
pub fn k0(h: f64, spec: &RadiusSpec, order: usize) -> Result<f64> {
    let nodes = radius_pair_nodes(spec, h, order)?;
    Ok(nodes
        .iter()
        .filter(|n| n[3] > h)
        .map(|n| n[0])
        .sum::<f64>()
        .clamp(0.0, 1.0))
}

/// Local upper bound `1 - K0 h (2 r_lower + h) / r_upper^2` on `lambda_U(h)`.
pub fn local_bound(h: f64, spec: &RadiusSpec, k0: f64) -> Result<f64> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&k0) {
        return invalid(format!("K0 must lie in [0, 1], got {k0}"));
    }
    if !(h >= 0.0 && h.is_finite()) {
        return invalid(format!("distance must be finite and non-negative, got {h}"));
    }
    Ok(1.0 - k0 * h * (2.0 * spec.r_lower + h) / (spec.r_upper * spec.r_upper))
}

/// Theoretical summaries at one distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSummary {
    pub h: f64,
    pub lambda_u: f64,
    pub spearman: f64,
    pub kappa_l: f64,
}

pub fn tail_summary(h: f64, spec: &RadiusSpec, order: usize) -> Result<TailSummary> {
    let nodes = radius_pair_nodes(spec, h, order)?;
    Ok(TailSummary {
        h,
        lambda_u: expect(&nodes, f64::min).clamp(0.0, 1.0),
        spearman: expect(&nodes, spearman_integrand).clamp(-1.0, 1.0),
        kappa_l: kappa_l(h, spec)?,
    })
}

/// Summary curve over a grid of distances.
pub fn summary_curve(hs: &[f64], spec: &RadiusSpec, order: usize) -> Result<Vec<TailSummary>> {
    hs.iter().map(|&h| tail_summary(h, spec, order)).collect()
}

pub fn write_summary_csv(path: &Path, rows: &[TailSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv_to<W: Write>(out: W, rows: &[TailSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Upper-tail behaviour of a component copula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailKind {
    Dependent,
    Independent,
}

/// Inputs of the max-mixture tail classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeInput {
    pub z_tail: TailKind,
    pub y_tail: TailKind,
    /// Tail index of the companion margins; `f64::INFINITY` for lighter-than-power tails.
    pub beta: f64,
    pub q: f64,
    pub lam_z: f64,
    pub lam_y: f64,
    /// Upper tail order of the companion copula.
    pub kappa_y: f64,
}

/// Upper tail dependence and tail order of the max-mixture. The tail order is `None`
/// where the classification does not determine it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeOutput {
    pub lambda_tilde: f64,
    pub kappa_tilde: Option<f64>,
}

impl RegimeInput {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return invalid(format!("tail index must be positive, got {}", self.beta));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return invalid(format!("mixing weight must lie in (0, 1], got {}", self.q));
        }
        for (name, lam, kind) in [
            ("lam_z", self.lam_z, self.z_tail),
            ("lam_y", self.lam_y, self.y_tail),
        ] {
            if !(0.0..=1.0).contains(&lam) {
                return invalid(format!("{name} must lie in [0, 1], got {lam}"));
            }
            if (lam > 0.0) != (kind == TailKind::Dependent) {
                return invalid(format!(
                    "{name} = {lam} is inconsistent with a {kind:?} tail"
                ));
            }
        }
        if !(1.0..=2.0).contains(&self.kappa_y) {
            return invalid(format!("kappa_y must lie in [1, 2], got {}", self.kappa_y));
        }
        Ok(())
    }
}

pub fn classify_mixture_tail(inp: &RegimeInput) -> Result<RegimeOutput> {
    inp.validate()?;
    use std::cmp::Ordering::{Equal, Greater, Less};
    use TailKind::{Dependent as D, Independent as I};
    let b = inp.beta;
    let branch = b.partial_cmp(&1.0).expect("beta validated");
    let (lambda, kappa) = match (inp.z_tail, inp.y_tail, branch) {
        (D, D, Less) => (inp.lam_y, None),
        (D, D, Equal) => (inp.q * inp.lam_z + (1.0 - inp.q) * inp.lam_y, None),
        (D, D, Greater) => (inp.lam_z, None),
        (D, I, Less) => (0.0, Some((1.0 / b).min(inp.kappa_y))),
        (D, I, Equal) => (inp.q * inp.lam_z, None),
        (D, I, Greater) => (inp.lam_z, None),
        (I, D, Less) => (inp.lam_y, None),
        (I, D, Equal) => ((1.0 - inp.q) * inp.lam_y, None),
        (I, D, Greater) => (0.0, Some(b.min(2.0))),
        (I, I, Less | Equal) => (0.0, Some(inp.kappa_y.min(2.0 / b))),
        (I, I, Greater) => (0.0, Some((b * inp.kappa_y).min(2.0))),
    };
    let kappa = if lambda > 0.0 { Some(1.0) } else { kappa };
    Ok(RegimeOutput {
        lambda_tilde: lambda,
        kappa_tilde: kappa,
    })
}

/// Lower-tail behaviour of the companion margins near zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CompanionLowerTail {
    /// `F_Y(0) > 0`, for example Student-t margins.
    MassAtZero,
    /// `F_Y` vanishes faster than `exp(-1/z)`, such as `exp(-z^-beta)` with `beta > 1`.
    FastDecay {
        kappa_l_y: f64,
        lower_tail_dependent: bool,
    },
    /// Any other behaviour near zero.
    Other,
}

/// Lower tail order of the max-mixture, `None` where it is not determined.
pub fn mixture_lower_tail_order(kappa_l_z: f64, companion: CompanionLowerTail) -> Option<f64> {
    match companion {
        CompanionLowerTail::MassAtZero => Some(kappa_l_z),
        CompanionLowerTail::FastDecay {
            lower_tail_dependent: true,
            ..
        } => Some(1.0),
        CompanionLowerTail::FastDecay { kappa_l_y, .. } => Some(kappa_l_y),
        CompanionLowerTail::Other => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::lens_area;
    use crate::randomfields::CovarianceSpec;

    fn spec(rl: f64, theta: f64) -> RadiusSpec {
        RadiusSpec::new(rl, 0.4, CovarianceSpec::exponential(theta)).unwrap()
    }

    #[test]
    fn boundary_values() {
        for sp in [spec(0.1, 1.0), spec(0.0, 0.25), spec(0.4, 1.0)] {
            assert!((lambda_u(0.0, &sp, 35).unwrap() - 1.0).abs() < 1e-12);
            assert!((spearman(0.0, &sp, 35).unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(lambda_u(0.8, &sp, 35).unwrap(), 0.0);
            assert_eq!(spearman(0.9, &sp, 35).unwrap(), 0.0);
            assert!((kappa_l(0.0, &sp).unwrap() - 1.0).abs() < 1e-15);
            assert!((kappa_l(0.8, &sp).unwrap() - 2.0).abs() < 1e-15);
        }
        let sp = spec(0.1, 1.0);
        let d = lens_area(0.4, 0.4, 0.3).unwrap() / (std::f64::consts::PI * 0.16);
        assert!((kappa_l(0.3, &sp).unwrap() - (2.0 - d)).abs() < 1e-14);
    }

    #[test]
    fn stdf_identities() {
        let sp = spec(0.1, 1.0);
        for h in [0.05, 0.2, 0.5] {
            let lam = lambda_u(h, &sp, 35).unwrap();
            assert!((2.0 - stdf_disk(1.0, 1.0, h, &sp, 35).unwrap() - lam).abs() < 1e-10);
            let a = stdf_disk(0.7, 1.3, h, &sp, 35).unwrap();
            let b = stdf_disk(1.4, 2.6, h, &sp, 35).unwrap();
            assert!((b - 2.0 * a).abs() < 1e-10);
            assert!((stdf_disk(0.6, 1e-300, h, &sp, 35).unwrap() - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn local_bound_holds() {
        for sp in [spec(0.0, 1.0), spec(0.1, 0.5), spec(0.2, 2.0)] {
            for i in 1..=20 {
                let h = 0.02 * i as f64;
                let k = k0(h, &sp, 35).unwrap();
                let bound = local_bound(h, &sp, k).unwrap();
                assert!(lambda_u(h, &sp, 35).unwrap() <= bound + 1e-12, "h={h}");
            }
        }
        assert_eq!(local_bound(0.0, &spec(0.1, 1.0), 0.5).unwrap(), 1.0);
        assert_eq!(local_bound(0.2, &spec(0.1, 1.0), 0.0).unwrap(), 1.0);
    }

    #[test]
    fn regime_examples() {
        let base = RegimeInput {
            z_tail: TailKind::Dependent,
            y_tail: TailKind::Independent,
            beta: 1.2,
            q: 0.2,
            lam_z: 0.5,
            lam_y: 0.0,
            kappa_y: 2.0,
        };
        assert_eq!(classify_mixture_tail(&base).unwrap().lambda_tilde, 0.5);
        let both = RegimeInput {
            y_tail: TailKind::Dependent,
            lam_y: 0.3,
            beta: 1.0,
            ..base
        };
        assert!((classify_mixture_tail(&both).unwrap().lambda_tilde - 0.34).abs() < 1e-15);
        let none = RegimeInput {
            z_tail: TailKind::Independent,
            lam_z: 0.0,
            beta: 1.5,
            ..base
        };
        assert_eq!(classify_mixture_tail(&none).unwrap().kappa_tilde, Some(2.0));
        let bad = RegimeInput { lam_z: 0.0, ..base };
        assert!(classify_mixture_tail(&bad).is_err());
    }

    #[test]
    fn lower_tail_lookup() {
        assert_eq!(
            mixture_lower_tail_order(1.6, CompanionLowerTail::MassAtZero),
            Some(1.6)
        );
        let fast = CompanionLowerTail::FastDecay {
            kappa_l_y: 1.4,
            lower_tail_dependent: false,
        };
        assert_eq!(mixture_lower_tail_order(1.6, fast), Some(1.4));
        let dep = CompanionLowerTail::FastDecay {
            kappa_l_y: 1.0,
            lower_tail_dependent: true,
        };
        assert_eq!(mixture_lower_tail_order(1.6, dep), Some(1.0));
        assert_eq!(
            mixture_lower_tail_order(1.6, CompanionLowerTail::Other),
            None
        );
    }
}
