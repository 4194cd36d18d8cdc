//! Univariate and bivariate normal and Student-t distribution functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use statrs::function::{beta, gamma};

use super::quad::{integrate_panels, GaussLegendre};
use crate::error::{domain, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile (Wichura's AS241); `p` must lie in `[0, 1]`.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&AS241_A, r) / poly(&AS241_B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&AS241_C, r) / poly(&AS241_D, r)
    } else {
        let r = r - 5.0;
        poly(&AS241_E, r) / poly(&AS241_F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

#[inline]
fn poly(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

const AS241_A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_4e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const AS241_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545e3,
];
const AS241_C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const AS241_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_7e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const AS241_E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const AS241_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_8e-15,
];

fn t_log_norm_const(nu: f64) -> f64 {
    gamma::ln_gamma(0.5 * (nu + 1.0)) - gamma::ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
}

pub fn t_pdf(x: f64, nu: f64) -> f64 {
    t_ln_pdf(x, nu).exp()
}

pub fn t_ln_pdf(x: f64, nu: f64) -> f64 {
    t_log_norm_const(nu) - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// Student-t distribution function via the regularized incomplete beta function.
pub fn t_cdf(x: f64, nu: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = if x * x < nu {
        // better conditioned near zero
        0.5 - 0.5 * beta::beta_reg(0.5, 0.5 * nu, x * x / (nu + x * x))
    } else {
        0.5 * beta::beta_reg(0.5 * nu, 0.5, nu / (nu + x * x))
    };
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Student-t quantile, polished by Newton steps on [`t_cdf`].
pub fn t_quantile(p: f64, nu: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    let lower = p.min(1.0 - p);
    let y = beta::inv_beta_reg(0.5 * nu, 0.5, 2.0 * lower);
    let mut x = -(nu * (1.0 - y) / y).sqrt();
    if !x.is_finite() {
        x = -1e10;
    }
    for _ in 0..3 {
        let f = t_cdf(x, nu) - lower;
        let d = t_pdf(x, nu);
        if d <= 0.0 || !d.is_finite() {
            break;
        }
        let step = f / d;
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    if p < 0.5 {
        x
    } else {
        -x
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_nan() || rho.abs() > 1.0 - 1e-12 {
        return domain(format!(
            "correlation must satisfy |rho| <= 1 - 1e-12, got {rho}"
        ));
    }
    Ok(())
}

fn panel_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20).expect("fixed order"))
}

/// Breakpoints on `[lo, hi]`: a unit grid plus points graded geometrically around `step`
/// with smallest spacing `width`.
fn graded_breaks(lo: f64, hi: f64, unit: f64, step: Option<(f64, f64)>) -> Vec<f64> {
    let mut b = vec![lo, hi];
    let mut x = lo + unit;
    while x < hi {
        b.push(x);
        x += unit;
    }
    if let Some((c, width)) = step {
        if c > lo && c < hi {
            b.push(c);
        }
        let mut g = width;
        while g < hi - lo {
            for p in [c - g, c + g] {
                if p > lo && p < hi {
                    b.push(p);
                }
            }
            g *= 4.0;
        }
    }
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// `P(X1 <= z1, X2 <= z2)` for a standard bivariate normal with correlation `rho`,
/// as one-dimensional quadrature of `phi(t) Phi((z2 - rho t) / sqrt(1 - rho^2))` on
/// `t <= z1`, truncated at `|t| = 8`.
pub fn bvn_cdf(z1: f64, z2: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let hi = z1.min(8.0);
    if hi <= -8.0 || z2 <= -8.0 {
        return Ok(0.0);
    }
    let s = (1.0 - rho * rho).sqrt();
    let z2c = z2.min(1e6);
    let step = if rho.abs() > 1e-300 {
        Some((z2c / rho, s / rho.abs()))
    } else {
        None
    };
    let breaks = graded_breaks(-8.0, hi, 1.0, step);
    let v = integrate_panels(panel_rule(), &breaks, |t| {
        norm_pdf(t) * norm_cdf((z2c - rho * t) / s)
    });
    Ok(v.clamp(0.0, 1.0))
}

fn genz_rule(n: usize) -> &'static GaussLegendre {
    static R6: OnceLock<GaussLegendre> = OnceLock::new();
    static R12: OnceLock<GaussLegendre> = OnceLock::new();
    static R20: OnceLock<GaussLegendre> = OnceLock::new();
    let cell = match n {
        6 => &R6,
        12 => &R12,
        _ => &R20,
    };
    cell.get_or_init(|| GaussLegendre::new(n).expect("fixed order"))
}

/// Bivariate normal upper orthant `P(X1 > h, X2 > k)` by Genz's adaptation of the
/// Drezner–Wesolowsky method.
fn bvnu(h: f64, k: f64, r: f64) -> f64 {
    let rule = if r.abs() < 0.3 {
        genz_rule(6)
    } else if r.abs() < 0.75 {
        genz_rule(12)
    } else {
        genz_rule(20)
    };
    let xs = rule.nodes();
    let ws = rule.weights();
    let mut hk = h * k;
    let mut k = k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = r.asin();
        for (x, w) in xs.iter().zip(ws) {
            let sn = (asr * (x + 1.0) * 0.5).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        // the rule above integrates over the half-range, hence 4 pi
        bvn = bvn * asr / (4.0 * PI) + norm_cdf(-h) * norm_cdf(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = (1.0 - r) * (1.0 + r);
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            bvn = a
                * (-(bs / as_ + hk) / 2.0).exp()
                * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
            if hk > -160.0 {
                let b = bs.sqrt();
                bvn -= (-hk / 2.0).exp()
                    * (2.0 * PI).sqrt()
                    * norm_cdf(-b / a)
                    * b
                    * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            let mut acc = 0.0;
            for (x, w) in xs.iter().zip(ws) {
                let xs2 = (a * (x + 1.0)).powi(2);
                let rs = (1.0 - xs2).sqrt();
                let asr = -(bs / xs2 + hk) / 2.0;
                if asr > -100.0 {
                    acc += a
                        * w
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                            - (1.0 + c * xs2 * (1.0 + d * xs2)));
                }
            }
            bvn = -(bvn + acc) / (2.0 * PI);
        }
        if r > 0.0 {
            bvn += norm_cdf(-h.max(k));
        } else {
            bvn = -bvn;
            if k > h {
                bvn += if h < 0.0 {
                    norm_cdf(k) - norm_cdf(h)
                } else {
                    norm_cdf(-h) - norm_cdf(-k)
                };
            }
        }
    }
    bvn
}

/// Fast bivariate normal distribution function (Genz); agrees with [`bvn_cdf`] to
/// near machine precision and is used in inner likelihood loops.
pub fn bvn_cdf_fast(z1: f64, z2: f64, rho: f64) -> f64 {
    bvnu(-z1, -z2, rho).clamp(0.0, 1.0)
}

/// `P(T1 <= t1, T2 <= t2)` for a standard bivariate Student-t with `nu` degrees of
/// freedom and correlation `rho`, by quadrature of the conditional representation.
pub fn bvt_cdf(t1: f64, t2: f64, rho: f64, nu: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(nu > 0.0) {
        return domain(format!("degrees of freedom must be positive, got {nu}"));
    }
    if t1 == f64::NEG_INFINITY || t2 == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let s2 = 1.0 - rho * rho;
    let cond = |x: f64| {
        let scale = ((nu + x * x) * s2 / (nu + 1.0)).sqrt();
        t_cdf((t2 - rho * x) / scale, nu + 1.0)
    };
    // x = sqrt(nu) tan(theta) tames the polynomial tails
    let sq = nu.sqrt();
    let th_hi = if t1.is_infinite() {
        0.5 * PI
    } else {
        (t1 / sq).atan()
    };
    let th_lo = -0.5 * PI;
    let mut breaks = graded_breaks(th_lo, th_hi, 0.25, None);
    if rho.abs() > 1e-300 && t2.is_finite() {
        let c = t2 / rho;
        let mut g = (s2 * (nu + c * c) / (nu + 1.0)).sqrt() / rho.abs();
        let ct = (c / sq).atan();
        if ct > th_lo && ct < th_hi {
            breaks.push(ct);
        }
        while g < 1e8 {
            for p in [c - g, c + g] {
                let pt = (p / sq).atan();
                if pt > th_lo && pt < th_hi {
                    breaks.push(pt);
                }
            }
            g *= 4.0;
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
    }
    let ln_c = t_log_norm_const(nu);
    let v = integrate_panels(panel_rule(), &breaks, |th| {
        let cth = th.cos();
        if cth <= 0.0 {
            return 0.0;
        }
        let x = sq * th.tan();
        // t density times dx/dtheta
        let dens = (ln_c + (nu + 1.0) * cth.ln()).exp() * sq / (cth * cth);
        dens * cond(x)
    });
    Ok(v.clamp(0.0, 1.0))
}

/// Closed-form bivariate t distribution function for integer degrees of freedom
/// (Dunnett–Sobel recursion in Genz's formulation).
pub fn bvt_cdf_int(nu: u32, dh: f64, dk: f64, r: f64) -> f64 {
    if nu == 0 {
        return f64::NAN;
    }
    if dh == f64::NEG_INFINITY || dk == f64::NEG_INFINITY {
        return 0.0;
    }
    if dh == f64::INFINITY {
        return t_cdf(dk, nu as f64);
    }
    if dk == f64::INFINITY {
        return t_cdf(dh, nu as f64);
    }
    let nuf = nu as f64;
    let tpi = 2.0 * PI;
    let snu = nuf.sqrt();
    let ors = 1.0 - r * r;
    let hrk = dh - r * dk;
    let krh = dk - r * dh;
    let (xnhk, xnkh) = if hrk.abs() + ors > 0.0 {
        (
            hrk * hrk / (hrk * hrk + ors * (nuf + dk * dk)),
            krh * krh / (krh * krh + ors * (nuf + dh * dh)),
        )
    } else {
        (0.0, 0.0)
    };
    let hs = if hrk < 0.0 { -1.0 } else { 1.0 };
    let ks = if krh < 0.0 { -1.0 } else { 1.0 };
    let mut bvt;
    if nu % 2 == 0 {
        bvt = ors.sqrt().atan2(-r) / tpi;
        let mut gmph = dh / (16.0 * (nuf + dh * dh)).sqrt();
        let mut gmpk = dk / (16.0 * (nuf + dk * dk)).sqrt();
        let mut btnckh = 2.0 * xnkh.sqrt().atan2((1.0 - xnkh).sqrt()) / PI;
        let mut btpdkh = 2.0 * (xnkh * (1.0 - xnkh)).sqrt() / PI;
        let mut btnchk = 2.0 * xnhk.sqrt().atan2((1.0 - xnhk).sqrt()) / PI;
        let mut btpdhk = 2.0 * (xnhk * (1.0 - xnhk)).sqrt() / PI;
        for j in 1..=nu / 2 {
            let jf = j as f64;
            bvt += gmph * (1.0 + ks * btnckh);
            bvt += gmpk * (1.0 + hs * btnchk);
            btnckh += btpdkh;
            btpdkh = 2.0 * jf * btpdkh * (1.0 - xnkh) / (2.0 * jf + 1.0);
            btnchk += btpdhk;
            btpdhk = 2.0 * jf * btpdhk * (1.0 - xnhk) / (2.0 * jf + 1.0);
            gmph = gmph * (2.0 * jf - 1.0) / (2.0 * jf * (1.0 + dh * dh / nuf));
            gmpk = gmpk * (2.0 * jf - 1.0) / (2.0 * jf * (1.0 + dk * dk / nuf));
        }
    } else {
        let qhrk = (dh * dh + dk * dk - 2.0 * r * dh * dk + nuf * ors).sqrt();
        let hkrn = dh * dk + r * nuf;
        let hkn = dh * dk - nuf;
        let hpk = dh + dk;
        bvt = (-snu * (hkn * qhrk + hpk * hkrn)).atan2(hkn * hkrn - nuf * hpk * qhrk) / tpi;
        if bvt < -1e-15 {
            bvt += 1.0;
        }
        let mut gmph = dh / (tpi * snu * (1.0 + dh * dh / nuf));
        let mut gmpk = dk / (tpi * snu * (1.0 + dk * dk / nuf));
        let mut btnckh = xnkh.sqrt();
        let mut btpdkh = btnckh;
        let mut btnchk = xnhk.sqrt();
        let mut btpdhk = btnchk;
        for j in 1..=(nu - 1) / 2 {
            let jf = j as f64;
            bvt += gmph * (1.0 + ks * btnckh);
            bvt += gmpk * (1.0 + hs * btnchk);
            btpdkh = (2.0 * jf - 1.0) * btpdkh * (1.0 - xnkh) / (2.0 * jf);
            btnckh += btpdkh;
            btpdhk = (2.0 * jf - 1.0) * btpdhk * (1.0 - xnhk) / (2.0 * jf);
            btnchk += btpdhk;
            gmph = gmph * 2.0 * jf / ((2.0 * jf + 1.0) * (1.0 + dh * dh / nuf));
            gmpk = gmpk * 2.0 * jf / ((2.0 * jf + 1.0) * (1.0 + dk * dk / nuf));
        }
    }
    bvt.clamp(0.0, 1.0)
}

/// Log density of the Gaussian copula at normal scores `(x1, x2)`.
pub fn gaussian_copula_ln_density(x1: f64, x2: f64, rho: f64) -> f64 {
    let s2 = 1.0 - rho * rho;
    -0.5 * s2.ln() - (rho * rho * (x1 * x1 + x2 * x2) - 2.0 * rho * x1 * x2) / (2.0 * s2)
}

/// Log density of the Student-t copula at t scores `(t1, t2)`.
pub fn t_copula_ln_density(t1: f64, t2: f64, rho: f64, nu: f64) -> f64 {
    let s2 = 1.0 - rho * rho;
    let q = (t1 * t1 - 2.0 * rho * t1 * t2 + t2 * t2) / s2;
    // bivariate t density: Gamma((nu+2)/2) / (Gamma(nu/2) nu pi sqrt(s2)) (1 + q/nu)^(-(nu+2)/2)
    let ln_joint = gamma::ln_gamma(0.5 * (nu + 2.0))
        - gamma::ln_gamma(0.5 * nu)
        - (nu * PI).ln()
        - 0.5 * s2.ln()
        - 0.5 * (nu + 2.0) * (q / nu).ln_1p();
    ln_joint - t_ln_pdf(t1, nu) - t_ln_pdf(t2, nu)
}

/// `P(T2 <= t2 | T1 = t1)` for the bivariate t, which is the copula partial derivative
/// with respect to the first argument.
pub fn t_conditional_cdf(t1: f64, t2: f64, rho: f64, nu: f64) -> f64 {
    let scale = ((nu + t1 * t1) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
    t_cdf((t2 - rho * t1) / scale, nu + 1.0)
}

/// Upper tail dependence coefficient of the t copula.
pub fn t_copula_tail_dependence(rho: f64, nu: f64) -> f64 {
    2.0 * t_cdf(-((nu + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt(), nu + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-15);
        assert!((norm_cdf(-5.0) - 2.866_515_718_791_939e-7).abs() < 1e-21);
        for p in [1e-12, 1e-5, 0.1, 0.5, 0.8, 0.999] {
            assert!((norm_cdf(norm_quantile(p)) - p).abs() < 1e-14 * p.max(1e-3));
        }
    }

    #[test]
    fn student_t_reference_values() {
        // nu = 1 is Cauchy, nu = 2 has a closed form
        for x in [-30.0, -2.0, -0.3, 0.0, 0.7, 5.0] {
            let cauchy = 0.5 + (x as f64).atan() / PI;
            assert!((t_cdf(x, 1.0) - cauchy).abs() < 1e-13, "x={x}");
            let two = 0.5 + x / (2.0 * (2.0 + x * x as f64).sqrt());
            assert!((t_cdf(x, 2.0) - two).abs() < 1e-13, "x={x}");
        }
        for nu in [1.0, 3.0, 4.5, 30.0] {
            for p in [1e-6, 0.01, 0.3, 0.5, 0.9, 0.999] {
                let q = t_quantile(p, nu);
                assert!(
                    (t_cdf(q, nu) - p).abs() < 1e-12 * p.max(1e-3),
                    "nu={nu} p={p}"
                );
            }
        }
    }

    #[test]
    fn bvn_orthant_matches_sheppard() {
        for rho in [-0.9, -0.3, 0.0, 0.5, 0.95, 0.999] {
            let exact = 0.25 + (rho as f64).asin() / (2.0 * PI);
            let q = bvn_cdf(0.0, 0.0, rho).unwrap();
            let g = bvn_cdf_fast(0.0, 0.0, rho);
            assert!((q - exact).abs() < 1e-7, "rho={rho} q={q}");
            assert!((g - exact).abs() < 1e-13, "rho={rho} g={g}");
        }
    }

    #[test]
    fn bvn_two_routes_agree() {
        for &(a, b) in &[
            (-2.0, 1.0),
            (0.3, 0.4),
            (1.5, -0.7),
            (3.0, 3.2),
            (-4.0, -4.5),
        ] {
            for rho in [-0.97, -0.5, 0.1, 0.6, 0.93, 0.9999] {
                let q = bvn_cdf(a, b, rho).unwrap();
                let g = bvn_cdf_fast(a, b, rho);
                assert!((q - g).abs() < 1e-9, "({a},{b},{rho}): {q} vs {g}");
            }
        }
    }

    #[test]
    fn bvn_independence_and_domain() {
        let v = bvn_cdf(0.4, -1.1, 0.0).unwrap();
        assert!((v - norm_cdf(0.4) * norm_cdf(-1.1)).abs() < 1e-12);
        assert!(bvn_cdf(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn bvt_two_routes_agree() {
        for nu in [1u32, 2, 3, 4, 7] {
            for &(a, b) in &[
                (-2.0, 1.0),
                (0.3, 0.4),
                (1.5, -0.7),
                (-6.0, -5.0),
                (4.0, 9.0),
            ] {
                for rho in [-0.8, 0.0, 0.45, 0.95] {
                    let q = bvt_cdf(a, b, rho, nu as f64).unwrap();
                    let c = bvt_cdf_int(nu, a, b, rho);
                    assert!((q - c).abs() < 1e-9, "nu={nu} ({a},{b},{rho}): {q} vs {c}");
                }
            }
        }
    }

    #[test]
    fn bvt_orthant_and_margins() {
        // the t orthant probability at zero matches the normal one
        let v = bvt_cdf(0.0, 0.0, 0.5, 3.0).unwrap();
        assert!((v - (0.25 + 0.5f64.asin() / (2.0 * PI))).abs() < 1e-9);
        let m = bvt_cdf(1.3, f64::INFINITY, 0.5, 3.0).unwrap();
        assert!((m - t_cdf(1.3, 3.0)).abs() < 1e-9);
    }

    #[test]
    fn copula_densities_integrate_to_one() {
        let rule = GaussLegendre::new(60).unwrap();
        let g = crate::numerics::quad::integrate_2d(&rule, (-8.0, 8.0), (-8.0, 8.0), |x, y| {
            (gaussian_copula_ln_density(x, y, 0.6)).exp() * norm_pdf(x) * norm_pdf(y)
        });
        assert!((g - 1.0).abs() < 1e-8);
        let t = crate::numerics::quad::integrate_2d(&rule, (-1.5, 1.5), (-1.5, 1.5), |a, b| {
            let (x, y) = (a.tan(), b.tan());
            let jac = 1.0 / (a.cos().powi(2) * b.cos().powi(2));
            t_copula_ln_density(x, y, 0.6, 5.0).exp() * t_pdf(x, 5.0) * t_pdf(y, 5.0) * jac
        });
        assert!((t - 1.0).abs() < 1e-3, "{t}");
    }
}
