//! Quadrature over the radius pair restricted to the wedge `r1 < r2`.
//!
//! Points are parametrised by `t = r1 / r2` and the normal score `x2` of `r2`. The
//! radius-pair density times the Jacobian `r2` becomes `phi(x2 | x1) r2 / d`, where `x1`
//! is the normal score of `r1 = t r2`. The ratio is written `t = t_lo + (1 - t_lo) B(tau)`
//! with the quintic smoothstep `B`, whose flat ends absorb the slowly converging density
//! of `r1 / r2` at `t = 1` (and at `t = 0` when `r_lower = 0`).

use crate::geometry::overlap_fractions_unchecked;
use crate::numerics::dist::{norm_cdf, norm_pdf, norm_quantile};
use crate::numerics::GaussLegendre;
use crate::randomfields::RadiusSpec;

pub(crate) const SCORE_LIMIT: f64 = 8.0;

#[derive(Debug, Clone, Copy, Default)]
pub struct Node {
    pub r1: f64,
    pub r2: f64,
    pub d1: f64,
    pub d2: f64,
    pub w: f64,
}

#[derive(Debug, Clone)]
pub struct Wedge {
    rl: f64,
    ru: f64,
    d: f64,
    rho: f64,
    s: f64,
    h: f64,
    t_lo: f64,
}

impl Wedge {
    /// Requires `r_lower < r_upper` and `rho < 1`.
    pub fn new(spec: &RadiusSpec, h: f64) -> Self {
        let rho = spec.cov.correlation(h);
        let t_lo = spec.r_lower / spec.r_upper;
        Wedge {
            rl: spec.r_lower,
            ru: spec.r_upper,
            d: spec.width(),
            rho,
            s: (1.0 - rho * rho).sqrt(),
            h,
            t_lo,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `(t, dt/dtau)`.
    #[inline]
    pub fn t_of_tau(&self, tau: f64) -> (f64, f64) {
        let span = 1.0 - self.t_lo;
        let b = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
        let db = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau);
        (self.t_lo + span * b, span * db)
    }

    /// Inverse of [`Self::t_of_tau`] on `[0, 1]`.
    pub fn tau_of_t(&self, t: f64) -> f64 {
        if t <= self.t_lo {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let p = (t - self.t_lo) / (1.0 - self.t_lo);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut x = p;
        for _ in 0..100 {
            let b = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x) - p;
            if b > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let db = 30.0 * x * x * (1.0 - x) * (1.0 - x);
            let mut nx = if db > 0.0 {
                x - b / db
            } else {
                0.5 * (lo + hi)
            };
            if !(nx > lo && nx < hi) {
                nx = 0.5 * (lo + hi);
            }
            if (nx - x).abs() <= 1e-16 {
                return nx;
            }
            x = nx;
        }
        x
    }

    fn score(&self, r: f64) -> f64 {
        norm_quantile(((r - self.rl) / self.d).clamp(1e-300, 1.0))
    }

    /// Where the ray `r1 = t r2` switches from the `r1`-score to the `r2`-score.
    ///
    /// With `r_lower > 0` the ray starts on the edge `r1 = r_lower`, where the `r2`-score
    /// parametrisation has an algebraic endpoint; the `r1`-score one has the same defect at
    /// `r2 = r_upper`. The split balances the score distance to both defects.
    fn split(&self, t: f64) -> f64 {
        let lo = self.rl / t;
        if self.rl <= 0.0 {
            return lo;
        }
        let x2_lo = self.score(lo);
        let x1_hi = self.score(t * self.ru);
        let g = |r2: f64| (self.score(r2) - x2_lo) - (x1_hi - self.score(t * r2));
        let (mut a, mut b) = (lo, self.ru);
        for _ in 0..40 {
            let m = 0.5 * (a + b);
            if g(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Nodes along the ray `r1 = t r2`, weights in the `t`-measure.
    ///
    /// The part of the ray before [`Wedge::split`] is parametrised by the score of `r1`,
    /// the rest by the score of `r2`, so the integrand decays like a Gaussian at both ends.
    pub fn line(&self, t: f64, rule: &GaussLegendre, out: &mut Vec<Node>) {
        out.clear();
        if t >= 1.0 {
            self.diagonal(rule, out);
            return;
        }
        if t <= 0.0 || self.rl >= t * self.ru {
            return;
        }
        let r2_min = self.rl / t;
        let r2_mid = self.split(t);
        // lens branch switches and the two points where one score stops tracking the other
        let cands = [
            self.h / (1.0 + t),
            if t < 1.0 {
                self.h / (1.0 - t)
            } else {
                f64::INFINITY
            },
            t * self.ru,
            if self.rl > 0.0 {
                self.rl / (t * t)
            } else {
                f64::INFINITY
            },
        ];
        let mut lower = [0.0f64; 8];
        let mut upper = [0.0f64; 8];
        let (mut nl, mut nu) = (0, 0);
        lower[nl] = -SCORE_LIMIT;
        nl += 1;
        lower[nl] = self.score(t * r2_mid).max(-SCORE_LIMIT);
        nl += 1;
        upper[nu] = self.score(r2_mid).clamp(-SCORE_LIMIT, SCORE_LIMIT);
        nu += 1;
        upper[nu] = SCORE_LIMIT;
        nu += 1;
        for &b in &cands {
            if !(b > r2_min && b < self.ru) {
                continue;
            }
            if b < r2_mid {
                let x = self.score(t * b);
                if x > lower[0] && x < lower[1] {
                    lower[nl] = x;
                    nl += 1;
                }
            } else {
                let x = self.score(b);
                if x > upper[0] && x < upper[1] {
                    upper[nu] = x;
                    nu += 1;
                }
            }
        }
        let lb = &mut lower[..nl];
        lb.sort_by(f64::total_cmp);
        for w in lb.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            for (x1, wx) in rule.mapped(w[0], w[1]) {
                let r1 = (self.rl + self.d * norm_cdf(x1)).max(self.rl);
                let r2 = (r1 / t).min(self.ru);
                let x2 = self.score(r2);
                let dens = norm_pdf((x1 - self.rho * x2) / self.s) / self.s;
                let (d1, d2) = overlap_fractions_unchecked(r1, r2, self.h);
                out.push(Node {
                    r1,
                    r2,
                    d1,
                    d2,
                    w: wx * dens * r2 / (t * self.d),
                });
            }
        }
        let ub = &mut upper[..nu];
        ub.sort_by(f64::total_cmp);
        for w in ub.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            for (x2, wx) in rule.mapped(w[0], w[1]) {
                let r2 = (self.rl + self.d * norm_cdf(x2)).min(self.ru);
                let r1 = t * r2;
                let x1 = self.score(r1);
                let dens = norm_pdf((x2 - self.rho * x1) / self.s) / self.s;
                let (d1, d2) = overlap_fractions_unchecked(r1, r2, self.h);
                out.push(Node {
                    r1,
                    r2,
                    d1,
                    d2,
                    w: wx * dens * r2 / self.d,
                });
            }
        }
    }

    /// The ray `r1 = r2`, parametrised by the common score `x`.
    ///
    /// The integrand `phi(x (1 - rho) / s) r / (s d)` decays slowly when `rho` is close to
    /// one; beyond the score limit the radius equals an endpoint to machine precision, so
    /// both tails are added in closed form.
    fn diagonal(&self, rule: &GaussLegendre, out: &mut Vec<Node>) {
        let k = (1.0 - self.rho) / self.s;
        let mut breaks = vec![-SCORE_LIMIT, SCORE_LIMIT];
        let touch = 0.5 * self.h;
        if touch > self.rl && touch < self.ru {
            breaks.insert(1, self.score(touch).clamp(-SCORE_LIMIT, SCORE_LIMIT));
        }
        for w in breaks.windows(2) {
            for (x, wx) in rule.mapped(w[0], w[1]) {
                let r = (self.rl + self.d * norm_cdf(x)).clamp(self.rl, self.ru);
                let (d1, d2) = overlap_fractions_unchecked(r, r, self.h);
                out.push(Node {
                    r1: r,
                    r2: r,
                    d1,
                    d2,
                    w: wx * norm_pdf(x * k) / self.s * r / self.d,
                });
            }
        }
        let tail = norm_cdf(-SCORE_LIMIT * k) / (k * self.s) / self.d;
        for r in [self.rl, self.ru] {
            if r > 0.0 {
                let (d1, d2) = overlap_fractions_unchecked(r, r, self.h);
                out.push(Node {
                    r1: r,
                    r2: r,
                    d1,
                    d2,
                    w: tail * r,
                });
            }
        }
    }

    /// Nodes over `t in [t_lo, t(tau_hi)]`, weights in the area measure of the radius pair.
    pub fn region(
        &self,
        tau_hi: f64,
        outer: &GaussLegendre,
        inner: &GaussLegendre,
        out: &mut Vec<Node>,
    ) {
        out.clear();
        if tau_hi <= 0.0 {
            return;
        }
        let mut line = Vec::with_capacity(6 * inner.order());
        let mut cuts = self.kinks();
        cuts.retain(|&c| c > 0.0 && c < tau_hi);
        cuts.insert(0, 0.0);
        cuts.push(tau_hi);
        for w in cuts.windows(2) {
            for (tau, wt) in outer.mapped(w[0], w[1]) {
                let (t, jac) = self.t_of_tau(tau);
                self.line(t, inner, &mut line);
                out.extend(line.iter().map(|n| Node {
                    w: n.w * wt * jac,
                    ..*n
                }));
            }
        }
    }

    /// Values of `tau` where a lens branch point crosses an end of the ray, sorted.
    pub fn kinks(&self) -> Vec<f64> {
        let (h, rl, ru) = (self.h, self.rl, self.ru);
        let mut ts = vec![1.0 - h / ru, h / ru - 1.0];
        if rl > 0.0 {
            if h > rl {
                ts.push(rl / (h - rl));
            }
            ts.push(rl / (h + rl));
        }
        let mut taus: Vec<f64> = ts
            .into_iter()
            .filter(|&t| t > self.t_lo && t < 1.0)
            .map(|t| self.tau_of_t(t))
            .filter(|&x| x > 1e-9 && x < 1.0 - 1e-9)
            .collect();
        taus.sort_by(f64::total_cmp);
        taus.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        taus
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomfields::CovarianceSpec;

    #[test]
    fn wedge_holds_half_the_mass() {
        let rule = GaussLegendre::new(35).unwrap();
        let mut nodes = Vec::new();
        for (rl, rho_range) in [(0.0, 0.3), (0.1, 1.0), (0.2, 5.0)] {
            let spec = RadiusSpec::new(rl, 0.4, CovarianceSpec::exponential(rho_range)).unwrap();
            for h in [0.05, 0.2, 0.5] {
                let w = Wedge::new(&spec, h);
                w.region(1.0, &rule, &rule, &mut nodes);
                let m: f64 = nodes.iter().map(|n| n.w).sum();
                assert!((m - 0.5).abs() < 2.5e-8, "rl={rl} h={h} mass={m}");
                assert!(nodes
                    .iter()
                    .all(|n| n.r1 <= n.r2 + 1e-15 && n.r1 >= rl - 1e-15));
            }
        }
    }
}
