//! Fast evaluator of the disk copula for likelihood loops.
//!
//! Every integrand is a sum of terms `g(delta) exp(delta x)` with `x = -ln u`. With
//! `s = 2 delta - 1` the exponential expands as `exp(x/2) sum_j c_j I_j(x/2) T_j(s)`, so each
//! ray of the wedge quadrature collapses into a few Chebyshev moments in `delta` that do
//! not depend on `u`. The integral up to `t = l(u1, u2)` then costs one partial panel,
//! integrated with the exact Legendre antiderivative of the panel interpolant.

use std::sync::OnceLock;

use crate::error::{check_unit_open, Result};
use crate::numerics::quad::legendre_with_derivative;
use crate::numerics::GaussLegendre;
use crate::randomfields::RadiusSpec;

use super::disk::{CopulaPoint, DiskCopula, DEFAULT_ORDER, U_CLAMP};
use super::wedge::{Node, Wedge};

/// Number of Chebyshev moments kept per ray.
const TERMS: usize = 24;
/// Largest `-ln u` handled by the moments; beyond it the exact quadrature is used.
const X_MAX: f64 = 8.0;
/// Panel breaks in `tau`, refined geometrically towards the diagonal `t = 1`.
const GRADED: [f64; 9] = [
    0.25, 0.5, 0.75, 0.875, 0.9375, 0.96875, 0.984375, 0.9921875, 0.99609375,
];

/// Moment kinds stored per ray.
const Q: usize = 0; // sum w T_j(s1)
const A: usize = 1; // sum w (1 - d1) T_j(s1)
const P: usize = 2; // sum w T_j(s2)
const B: usize = 3; // sum w (1 - d2) T_j(s2)
const KINDS: usize = 4;

#[derive(Debug, Clone)]
struct Panel {
    lo: f64,
    hi: f64,
    /// Index of the first ray.
    first: usize,
}

#[derive(Debug, Clone)]
struct Moments {
    wedge: Wedge,
    t_lo: f64,
    outer: GaussLegendre,
    /// Rule for rays evaluated directly next to the diagonal.
    direct: GaussLegendre,
    panels: Vec<Panel>,
    /// `dt/dtau` per ray.
    jac: Vec<f64>,
    /// Per ray, `KINDS x TERMS` moments in the `t`-measure.
    rays: Vec<f64>,
    /// Per panel boundary, accumulated moments in the area measure.
    cum: Vec<f64>,
    /// `P_k(x_j)` for the outer rule, row `j`.
    legendre: Vec<f64>,
    /// Barycentric weights of the outer nodes.
    bary: Vec<f64>,
}

/// Disk copula evaluator specialised for repeated evaluation at one distance.
#[derive(Debug)]
pub struct DiskKernel {
    spec: RadiusSpec,
    h: f64,
    moments: Option<Moments>,
    exact: OnceLock<DiskCopula>,
}

impl DiskKernel {
    /// Default orders: 12 points per `tau` panel and 16 per ray panel, which keeps the
    /// relative density error near `1e-6`.
    pub fn new(spec: &RadiusSpec, h: f64) -> Result<Self> {
        Self::with_orders(spec, h, 12, 16)
    }

    pub fn with_orders(spec: &RadiusSpec, h: f64, outer: usize, inner: usize) -> Result<Self> {
        // validates and classifies the regime
        let probe = DiskCopula::new(spec, h, 1)?;
        let wedge = if probe.is_mixture() {
            Some(Wedge::new(spec, h))
        } else {
            None
        };
        let exact = OnceLock::new();
        if wedge.is_none() {
            let _ = exact.set(DiskCopula::new(spec, h, DEFAULT_ORDER)?);
        }
        let moments = match wedge {
            Some(w) => Some(Moments::build(
                w,
                spec,
                GaussLegendre::new(outer)?,
                GaussLegendre::new(inner)?,
            )),
            None => None,
        };
        Ok(DiskKernel {
            spec: *spec,
            h,
            moments,
            exact,
        })
    }

    pub fn distance(&self) -> f64 {
        self.h
    }

    fn exact(&self) -> &DiskCopula {
        self.exact.get_or_init(|| {
            DiskCopula::new(&self.spec, self.h, DEFAULT_ORDER)
                .expect("parameters validated on construction")
        })
    }

    pub fn eval(&self, u1: f64, u2: f64) -> Result<CopulaPoint> {
        check_unit_open("u1", u1)?;
        check_unit_open("u2", u2)?;
        let Some(m) = &self.moments else {
            return self.exact().eval(u1, u2);
        };
        let u1 = u1.clamp(U_CLAMP, 1.0 - U_CLAMP);
        let u2 = u2.clamp(U_CLAMP, 1.0 - U_CLAMP);
        if -u1.min(u2).ln() > X_MAX {
            return self.exact().eval(u1, u2);
        }
        Ok(m.eval(u1, u2))
    }

    pub fn pdf(&self, u1: f64, u2: f64) -> Result<f64> {
        match self.eval(u1, u2)?.pdf {
            Some(p) => Ok(p),
            None => self.exact().pdf(u1, u2),
        }
    }
}

/// `c_j I_j(x/2) exp(x/2)` for `j < TERMS`, with `c_0 = 1` and `c_j = 2`, so that
/// `exp(delta x) = sum_j coef_j T_j(2 delta - 1)`.
fn bessel_coefficients(x: f64, out: &mut [f64; TERMS]) {
    let z = 0.5 * x;
    if z < 1e-8 {
        out.fill(0.0);
        out[0] = 1.0 + z;
        out[1] = z;
        return;
    }
    // Miller's backward recurrence normalised by I_0 + 2 sum I_j = exp(z)
    let start = TERMS + 20 + (2.0 * z) as usize;
    let (mut next, mut cur) = (0.0f64, 1e-280f64);
    let mut sum = 0.0;
    for j in (1..=start).rev() {
        let prev = next + 2.0 * j as f64 / z * cur;
        if j < TERMS {
            out[j] = cur;
        }
        sum += 2.0 * cur;
        next = cur;
        cur = prev;
        if cur > 1e250 {
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
            sum *= 1e-250;
            next *= 1e-250;
            cur *= 1e-250;
        }
    }
    out[0] = cur;
    sum += cur;
    // I_j / exp(z) times c_j exp(x)
    let scale = x.exp() / sum;
    out[0] *= scale;
    for v in out.iter_mut().skip(1) {
        *v *= 2.0 * scale;
    }
}

fn chebyshev_accumulate(s: f64, w: f64, w_scaled: f64, plain: &mut [f64], scaled: &mut [f64]) {
    let (mut t0, mut t1) = (1.0, s);
    plain[0] += w;
    scaled[0] += w_scaled;
    plain[1] += w * t1;
    scaled[1] += w_scaled * t1;
    for j in 2..TERMS {
        let t2 = 2.0 * s * t1 - t0;
        plain[j] += w * t2;
        scaled[j] += w_scaled * t2;
        t0 = t1;
        t1 = t2;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Moments {
    fn build(wedge: Wedge, spec: &RadiusSpec, outer: GaussLegendre, inner: GaussLegendre) -> Self {
        let mut breaks = vec![0.0];
        breaks.extend(wedge.kinks());
        breaks.extend(GRADED);
        breaks.push(1.0);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let n = outer.order();
        let mut panels = Vec::with_capacity(breaks.len());
        let mut jac = Vec::new();
        let mut rays = Vec::new();
        let mut line: Vec<Node> = Vec::new();
        for w in breaks.windows(2) {
            panels.push(Panel {
                lo: w[0],
                hi: w[1],
                first: jac.len(),
            });
            for (tau, _) in outer.mapped(w[0], w[1]) {
                let (t, dt) = wedge.t_of_tau(tau);
                wedge.line(t, &inner, &mut line);
                let mut mom = vec![0.0; KINDS * TERMS];
                let (q, rest) = mom.split_at_mut(TERMS);
                let (a, rest) = rest.split_at_mut(TERMS);
                let (p, b) = rest.split_at_mut(TERMS);
                for nd in &line {
                    chebyshev_accumulate(2.0 * nd.d1 - 1.0, nd.w, nd.w * (1.0 - nd.d1), q, a);
                    chebyshev_accumulate(2.0 * nd.d2 - 1.0, nd.w, nd.w * (1.0 - nd.d2), p, b);
                }
                jac.push(dt);
                rays.extend(mom);
            }
        }
        let mut cum = vec![0.0; (panels.len() + 1) * KINDS * TERMS];
        let stride = KINDS * TERMS;
        for (pi, pan) in panels.iter().enumerate() {
            let half = 0.5 * (pan.hi - pan.lo);
            let (done, rest) = cum.split_at_mut((pi + 1) * stride);
            let next = &mut rest[..stride];
            next.copy_from_slice(&done[pi * stride..]);
            for k in 0..n {
                let ray = pan.first + k;
                let f = half * outer.weights()[k] * jac[ray];
                for (c, m) in next.iter_mut().zip(&rays[ray * stride..(ray + 1) * stride]) {
                    *c += f * m;
                }
            }
        }
        let mut legendre = vec![0.0; n * (n + 1)];
        for (j, &x) in outer.nodes().iter().enumerate() {
            for k in 0..=n {
                legendre[j * (n + 1) + k] = legendre_with_derivative(k, x).0;
            }
        }
        let xs = outer.nodes();
        let bary = (0..n)
            .map(|j| {
                1.0 / (0..n)
                    .filter(|&m| m != j)
                    .map(|m| xs[j] - xs[m])
                    .product::<f64>()
            })
            .collect();
        Moments {
            t_lo: spec.r_lower / spec.r_upper,
            direct: GaussLegendre::new(DEFAULT_ORDER).expect("positive order"),
            wedge,
            outer,
            panels,
            jac,
            rays,
            cum,
            legendre,
            bary,
        }
    }

    fn ray(&self, k: usize, kind: usize) -> &[f64] {
        let off = (k * KINDS + kind) * TERMS;
        &self.rays[off..off + TERMS]
    }

    fn cum(&self, p: usize, kind: usize) -> &[f64] {
        let off = (p * KINDS + kind) * TERMS;
        &self.cum[off..off + TERMS]
    }

    /// Weights integrating the panel interpolant from `-1` to `x`.
    fn partial_weights(&self, x: f64, out: &mut [f64]) {
        let n = self.outer.order();
        let mut px = vec![0.0; n + 1];
        px[0] = 1.0;
        if n >= 1 {
            px[1] = x;
        }
        for k in 1..n {
            px[k + 1] = ((2 * k + 1) as f64 * x * px[k] - k as f64 * px[k - 1]) / (k + 1) as f64;
        }
        for (j, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.legendre[j * (n + 1)..(j + 1) * (n + 1)];
            let mut s = x + 1.0;
            for k in 1..n {
                s += row[k] * (px[k + 1] - px[k - 1]);
            }
            *o = 0.5 * self.outer.weights()[j] * s;
        }
    }

    fn eval(&self, u1: f64, u2: f64) -> CopulaPoint {
        let swapped = u1 < u2;
        let (a, b) = if swapped { (u2, u1) } else { (u1, u2) };
        let (ua, ub) = (-a.ln(), -b.ln());
        let ell = (ua / ub).sqrt().min(1.0);
        let mut ca = [0.0; TERMS];
        let mut cb = [0.0; TERMS];
        bessel_coefficients(ua, &mut ca);
        bessel_coefficients(ub, &mut cb);

        let last = self.panels.len();
        let full = |kind| self.cum(last, kind);
        let s0 = dot(&ca, full(Q)) + dot(&ca, full(P));
        let s1 = s0 - dot(&ca, full(A)) - dot(&ca, full(B));

        let mut reg = [[0.0; TERMS]; KINDS];
        let mut hl = 0.0;
        if ell > self.t_lo {
            let tau = if ell >= 1.0 {
                1.0
            } else {
                self.wedge.tau_of_t(ell)
            };
            let pi = self.panels.iter().position(|p| tau < p.hi).unwrap_or(last);
            for (kind, r) in reg.iter_mut().enumerate() {
                r.copy_from_slice(self.cum(pi, kind));
            }
            let n = self.outer.order();
            if pi < last {
                let pan = &self.panels[pi];
                let half = 0.5 * (pan.hi - pan.lo);
                let x = ((tau - pan.lo) / half - 1.0).clamp(-1.0, 1.0);
                let mut beta = vec![0.0; n];
                self.partial_weights(x, &mut beta);
                for (k, bk) in beta.iter().enumerate() {
                    let ray = pan.first + k;
                    let f = half * bk * self.jac[ray];
                    for (kind, r) in reg.iter_mut().enumerate() {
                        for (rv, m) in r.iter_mut().zip(self.ray(ray, kind)) {
                            *rv += f * m;
                        }
                    }
                }
            }
            if pi + 1 >= last {
                // next to the diagonal the ray integral is not smooth in tau
                let mut line = Vec::new();
                self.wedge.line(ell, &self.direct, &mut line);
                hl = line
                    .iter()
                    .map(|nd| nd.w * nd.d1 * (nd.d1 * ua).exp())
                    .sum();
            } else {
                let pan = &self.panels[pi];
                let x = 2.0 * (tau - pan.lo) / (pan.hi - pan.lo) - 1.0;
                let xs = self.outer.nodes();
                let mut lm = [0.0; TERMS];
                let mut den = 0.0;
                let mut hit = None;
                for k in 0..n {
                    let d = x - xs[k];
                    if d == 0.0 {
                        hit = Some(k);
                        break;
                    }
                    let c = self.bary[k] / d;
                    den += c;
                    let (q, am) = (self.ray(pan.first + k, Q), self.ray(pan.first + k, A));
                    for j in 0..TERMS {
                        lm[j] += c * (q[j] - am[j]);
                    }
                }
                match hit {
                    Some(k) => {
                        let (q, am) = (self.ray(pan.first + k, Q), self.ray(pan.first + k, A));
                        for j in 0..TERMS {
                            lm[j] = q[j] - am[j];
                        }
                    }
                    None => lm.iter_mut().for_each(|v| *v /= den),
                }
                hl = dot(&ca, &lm);
            }
        }

        let ea = |kind: usize| dot(&ca, &reg[kind]);
        let eb = |kind: usize| dot(&cb, &reg[kind]);
        let ic = eb(P) - ea(Q);
        let i1 = eb(P) - ea(A);
        let i2 = eb(B) - ea(Q);
        let ip = eb(B) - ea(A);
        let cdf = a * b * (s0 + ic);
        let da = b * (s0 - s1 + i1);
        let db = a * (s0 + i2);
        let pdf = s0 - s1 + ip + ell / (2.0 * ub) * hl;
        let (du1, du2) = if swapped { (db, da) } else { (da, db) };
        CopulaPoint {
            cdf: cdf.clamp(0.0, a.min(b)),
            du1,
            du2,
            pdf: Some(pdf),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomfields::CovarianceSpec;

    #[test]
    fn bessel_expansion_reproduces_exponential() {
        let mut c = [0.0; TERMS];
        for x in [0.0, 1e-10, 0.3, 2.0, 7.0, X_MAX] {
            bessel_coefficients(x, &mut c);
            for d in [0.0, 0.2, 0.5, 0.93, 1.0] {
                let s = 2.0 * d - 1.0;
                let (mut t0, mut t1) = (1.0, s);
                let mut v = c[0] + c[1] * s;
                for cj in c.iter().skip(2) {
                    let t2 = 2.0 * s * t1 - t0;
                    v += cj * t2;
                    t0 = t1;
                    t1 = t2;
                }
                let e = (d * x).exp();
                assert!((v - e).abs() < 1e-13 * x.exp(), "x={x} d={d}: {v} vs {e}");
            }
        }
    }

    #[test]
    fn agrees_with_exact_quadrature() {
        let grid = [0.002, 0.05, 0.2, 0.45, 0.5, 0.7, 0.9, 0.998];
        for (rl, theta, h) in [
            (0.0, 0.25, 0.05),
            (0.1, 1.0, 0.1),
            (0.2, 1.0, 0.3),
            (0.0, 0.25, 0.3),
            (0.05, 0.1, 0.02),
        ] {
            let spec = RadiusSpec::new(rl, 0.4, CovarianceSpec::exponential(theta)).unwrap();
            let k = DiskKernel::with_orders(&spec, h, 16, 20).unwrap();
            let e = DiskCopula::new(&spec, h, DEFAULT_ORDER).unwrap();
            for &a in &grid {
                for &b in &grid {
                    let (p, q) = (k.eval(a, b).unwrap(), e.eval(a, b).unwrap());
                    let (pp, qp) = (p.pdf.unwrap(), q.pdf.unwrap());
                    assert!(
                        (p.cdf - q.cdf).abs() < 5e-8,
                        "cdf {rl} {h} ({a},{b}) {} {}",
                        p.cdf,
                        q.cdf
                    );
                    assert!(
                        (p.du1 - q.du1).abs() < 5e-7 && (p.du2 - q.du2).abs() < 5e-7,
                        "du {rl} {h} ({a},{b}) {} {} {} {}",
                        p.du1,
                        q.du1,
                        p.du2,
                        q.du2
                    );
                    assert!(
                        (pp - qp).abs() < 1e-5 * qp.max(1.0),
                        "pdf {rl} {h} ({a},{b}) {pp} {qp}"
                    );
                }
            }
            let fast = DiskKernel::new(&spec, h).unwrap();
            for &a in &grid {
                for &b in &grid {
                    let (pp, qp) = (fast.pdf(a, b).unwrap(), e.pdf(a, b).unwrap());
                    assert!(
                        (pp - qp).abs() < 2e-5 * qp.max(1.0),
                        "default orders ({a},{b}) {pp} {qp}"
                    );
                }
            }
        }
    }
}
