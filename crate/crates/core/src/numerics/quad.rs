//! Gauss–Legendre rules, tensor-product integration and bracketed root finding.

use crate::error::{invalid, Error, Result};

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("quadrature order must be at least 1");
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    dp = legendre_with_derivative(n, x).1;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(GaussLegendre { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes and weights of an `n`-point rule on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return invalid(format!("bad interval [{a}, {b}]"));
    }
    let rule = GaussLegendre::new(n)?;
    Ok(rule.mapped(a, b).unzip())
}

/// Tensor-product integral of `f` over `[xa, xb] x [ya, yb]`.
pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
    rule: &GaussLegendre,
    (xa, xb): (f64, f64),
    (ya, yb): (f64, f64),
    mut f: F,
) -> f64 {
    let mut total = 0.0;
    for (x, wx) in rule.mapped(xa, xb) {
        for (y, wy) in rule.mapped(ya, yb) {
            total += wx * wy * f(x, y);
        }
    }
    total
}

/// Composite rule over consecutive breakpoints.
pub fn integrate_panels<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    breaks: &[f64],
    mut f: F,
) -> f64 {
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| rule.integrate(w[0], w[1], &mut f))
        .sum()
}

/// Bisection for a root of `f` in `[lo, hi]`; `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if !(flo.is_finite() && fhi.is_finite()) {
        return Err(Error::NoFiniteRoot(format!(
            "non-finite bracket values on [{lo}, {hi}]"
        )));
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoFiniteRoot(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * mid.abs().max(1e-300) || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Inverts an increasing function on `(lo, hi)`, expanding the bracket geometrically
/// when `hi` is too small.
pub fn invert_increasing<F: FnMut(f64) -> f64>(
    mut f: F,
    target: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let mut hi = hi;
    let mut g = |x: f64| f(x) - target;
    let mut tries = 0;
    while g(hi) < 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 2000 || !hi.is_finite() {
            return Err(Error::NoFiniteRoot(format!("target {target} not reached")));
        }
    }
    bisect(g, lo, hi, 1e-15)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        let rule = GaussLegendre::new(10).unwrap();
        // exact for degree 19
        let v = rule.integrate(-1.0, 2.0, |x| x.powi(19));
        let exact = (2f64.powi(20) - 1.0) / 20.0;
        assert!((v - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn weights_sum_to_length() {
        for n in [1, 2, 7, 35, 64] {
            let rule = GaussLegendre::new(n).unwrap();
            let s: f64 = rule.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-14, "n={n}");
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn zero_order_rejected() {
        assert!(GaussLegendre::new(0).is_err());
    }

    #[test]
    fn known_three_point_rule() {
        let rule = GaussLegendre::new(3).unwrap();
        assert!((rule.nodes()[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((rule.weights()[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn two_dimensional_gaussian_mass() {
        let rule = GaussLegendre::new(35).unwrap();
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let v = integrate_2d(&rule, (-8.0, 8.0), (-8.0, 8.0), |x, y| phi(x) * phi(y));
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn bisection_and_inversion() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
        let r = invert_increasing(|x| x.ln(), 10.0, 1e-9, 1.0).unwrap();
        assert!((r - 10f64.exp()).abs() < 1e-9 * 10f64.exp());
    }
}
