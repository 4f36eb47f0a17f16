//! Incomplete gamma functions, the exponential integral `E1 = Γ(0, ·)`, the
//! function `F(t) = (1 - e^{-t})/t + Γ(0, t)` and its inverse.
//!
//! Every evaluation goes through the logarithm of the prefactor `x^s e^{-x}`
//! so that orders in the hundreds or thousands neither overflow nor lose
//! precision. The power series is used below `x = s + 1` and the Lentz
//! continued fraction above it, so neither complement is ever formed by
//! subtracting two nearly equal numbers.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const TINY: f64 = 1e-300;

/// Convergence settings for the series and continued fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFunConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SpecFunConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-15,
            max_iter: 20_000,
        }
    }
}

impl SpecFunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1e-6) {
            return Err(Error::InvalidParams(format!(
                "specfun rel_tol must lie in (0, 1e-6), got {}",
                self.rel_tol
            )));
        }
        if self.max_iter < 200 {
            return Err(Error::InvalidParams(format!(
                "specfun max_iter must be >= 200, got {}",
                self.max_iter
            )));
        }
        Ok(())
    }
}

/// The Euler–Mascheroni constant.
pub fn euler_gamma() -> f64 {
    EULER_GAMMA
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of `Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x >= 10.0 {
        // Stirling series; the truncation error is below 1e-16 for x >= 10.
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        let series = inv
            * (1.0 / 12.0
                + inv2
                    * (-1.0 / 360.0
                        + inv2
                            * (1.0 / 1260.0
                                + inv2
                                    * (-1.0 / 1680.0
                                        + inv2
                                            * (1.0 / 1188.0
                                                + inv2 * (-691.0 / 360_360.0 + inv2 / 156.0))))));
        return (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series;
    }
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut a = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + a.ln()
}

/// `ln k!`.
pub fn ln_factorial(k: u64) -> f64 {
    const SMALL: usize = 20;
    if (k as usize) < SMALL {
        let mut acc = 1.0f64;
        for i in 2..=k {
            acc *= i as f64;
        }
        acc.ln()
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

fn check_nonneg(s: f64, x: f64) -> Result<()> {
    if !(s >= 0.0 && x >= 0.0) || !s.is_finite() || x.is_nan() {
        return Err(domain(format!(
            "incomplete gamma requires s >= 0, x >= 0; got s={s}, x={x}"
        )));
    }
    Ok(())
}

/// `Σ x^n / (s (s+1) ... (s+n))`, so that `γ(s,x) = x^s e^{-x} · series`.
fn lower_series(s: f64, x: f64, cfg: &SpecFunConfig) -> Result<f64> {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut ap = s;
    for _ in 0..cfg.max_iter {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() <= sum.abs() * cfg.rel_tol {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence {
        what: "lower incomplete gamma series",
        iterations: cfg.max_iter,
    })
}

/// Lentz continued fraction with `Γ(s,x) = x^s e^{-x} · cf`.
fn upper_cf(s: f64, x: f64, cfg: &SpecFunConfig) -> Result<f64> {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / if b.abs() < TINY { TINY } else { b };
    let mut h = d;
    for i in 1..=cfg.max_iter {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() <= cfg.rel_tol {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence {
        what: "upper incomplete gamma continued fraction",
        iterations: cfg.max_iter,
    })
}

/// Regularized pair `(P(s,x), Q(s,x))` for `s > 0`, `x >= 0`.
pub fn regularized_gamma_with(s: f64, x: f64, cfg: &SpecFunConfig) -> Result<(f64, f64)> {
    check_nonneg(s, x)?;
    if s == 0.0 {
        return Err(domain("regularized gamma requires s > 0"));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let ln_pre = s * x.ln() - x - ln_gamma(s);
    if x < s + 1.0 {
        let p = (ln_pre + lower_series(s, x, cfg)?.ln()).exp();
        Ok((p, 1.0 - p))
    } else {
        let q = (ln_pre + upper_cf(s, x, cfg)?.ln()).exp();
        Ok((1.0 - q, q))
    }
}

/// Regularized lower incomplete gamma `P(s, x) = γ(s,x)/Γ(s)`.
pub fn regularized_gamma_p(s: f64, x: f64) -> Result<f64> {
    regularized_gamma_with(s, x, &SpecFunConfig::default()).map(|(p, _)| p)
}

/// Regularized upper incomplete gamma `Q(s, x) = Γ(s,x)/Γ(s)`.
pub fn regularized_gamma_q(s: f64, x: f64) -> Result<f64> {
    regularized_gamma_with(s, x, &SpecFunConfig::default()).map(|(_, q)| q)
}

/// Lower incomplete gamma `γ(s, x) = ∫_0^x t^{s-1} e^{-t} dt`.
///
/// `γ(0, x)` diverges for every `x > 0` and is reported as a singularity.
pub fn lower_inc_gamma_with(s: f64, x: f64, cfg: &SpecFunConfig) -> Result<f64> {
    check_nonneg(s, x)?;
    if s == 0.0 {
        return Err(Error::Singularity(format!(
            "γ(0, {x}) diverges at the origin"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(ln_gamma(s).exp());
    }
    if x < s + 1.0 {
        Ok((s * x.ln() - x + lower_series(s, x, cfg)?.ln()).exp())
    } else {
        let (p, _) = regularized_gamma_with(s, x, cfg)?;
        Ok((ln_gamma(s) + p.ln()).exp())
    }
}

pub fn lower_inc_gamma(s: f64, x: f64) -> Result<f64> {
    lower_inc_gamma_with(s, x, &SpecFunConfig::default())
}

/// Upper incomplete gamma `Γ(s, x) = ∫_x^∞ t^{s-1} e^{-t} dt`, including `Γ(0, x) = E1(x)`.
pub fn upper_inc_gamma_with(s: f64, x: f64, cfg: &SpecFunConfig) -> Result<f64> {
    check_nonneg(s, x)?;
    if s == 0.0 {
        if x == 0.0 {
            return Err(Error::Singularity("Γ(0, 0) is infinite".into()));
        }
        return exp_integral_e1_with(x, cfg);
    }
    if x == 0.0 {
        return Ok(ln_gamma(s).exp());
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x < s + 1.0 {
        let (_, q) = regularized_gamma_with(s, x, cfg)?;
        Ok((ln_gamma(s) + q.ln()).exp())
    } else {
        Ok((s * x.ln() - x + upper_cf(s, x, cfg)?.ln()).exp())
    }
}

pub fn upper_inc_gamma(s: f64, x: f64) -> Result<f64> {
    upper_inc_gamma_with(s, x, &SpecFunConfig::default())
}

/// Exponential integral `E1(x) = Γ(0, x)` for `x > 0`.
pub fn exp_integral_e1_with(x: f64, cfg: &SpecFunConfig) -> Result<f64> {
    if !(x > 0.0) {
        return Err(domain(format!("E1 requires x > 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x <= 1.0 {
        // E1(x) = -γ - ln x - Σ_{k>=1} (-x)^k / (k k!)
        let mut sum = 0.0;
        let mut fact = 1.0;
        for k in 1..=cfg.max_iter {
            fact *= -x / k as f64;
            let term = fact / k as f64;
            sum += term;
            if term.abs() <= sum.abs() * cfg.rel_tol {
                return Ok(-EULER_GAMMA - x.ln() - sum);
            }
        }
        Err(Error::NoConvergence {
            what: "E1 power series",
            iterations: cfg.max_iter,
        })
    } else {
        let mut b = x + 1.0;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=cfg.max_iter {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let delta = c * d;
            h *= delta;
            if (delta - 1.0).abs() <= cfg.rel_tol {
                return Ok(h * (-x).exp());
            }
        }
        Err(Error::NoConvergence {
            what: "E1 continued fraction",
            iterations: cfg.max_iter,
        })
    }
}

pub fn exp_integral_e1(x: f64) -> Result<f64> {
    exp_integral_e1_with(x, &SpecFunConfig::default())
}

/// `Ein(x) = γ + ln x + E1(x) = ∫_0^x (1 - e^{-t})/t dt`, evaluated by its
/// own power series below 1 where the sum on the right cancels badly.
pub fn ein(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(domain(format!("Ein requires x > 0, got {x}")));
    }
    if x > 1.0 {
        return Ok(EULER_GAMMA + x.ln() + exp_integral_e1(x)?);
    }
    let mut sum = 0.0;
    let mut fact = -1.0;
    for k in 1..200 {
        fact *= -x / k as f64;
        let term = fact / k as f64;
        sum += term;
        if term.abs() <= sum.abs() * 1e-17 {
            break;
        }
    }
    Ok(sum)
}

/// `F(t) = (1 - e^{-t})/t + Γ(0, t)`, a decreasing bijection of `(0, ∞)` onto itself.
pub fn f_func(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain(format!("F requires t > 0, got {t}")));
    }
    Ok(-(-t).exp_m1() / t + exp_integral_e1(t)?)
}

/// Inverse of [`f_func`]: the `t > 0` with `F(t) = y`.
///
/// Newton iterations run in `u = ln t`, where `dF/du = -(1 - e^{-t})/t`,
/// safeguarded by a bisection bracket in `u`.
pub fn f_inverse(y: f64) -> Result<f64> {
    f_inverse_with(y, &SpecFunConfig::default())
}

pub fn f_inverse_with(y: f64, cfg: &SpecFunConfig) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(domain(format!("F^-1 requires finite y > 0, got {y}")));
    }
    // Near zero F(t) ≈ 1 - γ - ln t, at infinity F(t) ≈ 1/t.
    let t0 = if y > 1.0 {
        (1.0 - EULER_GAMMA - y).exp()
    } else {
        1.0 / y
    };
    let resid = |u: f64| -> Result<f64> { Ok(f_func(u.exp())? - y) };

    let mut lo = t0.ln();
    let mut hi = lo;
    let mut f_lo = resid(lo)?;
    let mut f_hi = f_lo;
    // F is decreasing: positive residual means t is too small.
    let mut steps = 0;
    while f_lo < 0.0 {
        lo -= 1.0;
        f_lo = resid(lo)?;
        steps += 1;
        if steps > 2000 {
            return Err(Error::NoConvergence {
                what: "F^-1 bracketing",
                iterations: steps,
            });
        }
    }
    while f_hi > 0.0 {
        hi += 1.0;
        f_hi = resid(hi)?;
        steps += 1;
        if steps > 2000 {
            return Err(Error::NoConvergence {
                what: "F^-1 bracketing",
                iterations: steps,
            });
        }
    }
    if f_lo == 0.0 {
        return Ok(lo.exp());
    }
    if f_hi == 0.0 {
        return Ok(hi.exp());
    }

    let mut u = 0.5 * (lo + hi);
    for _ in 0..cfg.max_iter.min(500) {
        let t = u.exp();
        let r = f_func(t)? - y;
        if r.abs() <= 1e-15 * y {
            return Ok(t);
        }
        if r > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let slope = (-t).exp_m1() / t; // dF/du = -(1 - e^{-t})/t
        let mut next = u - r / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 4.0 * f64::EPSILON * u.abs().max(1.0) {
            return Ok(next.exp());
        }
        u = next;
    }
    Err(Error::NoConvergence {
        what: "F^-1 Newton iteration",
        iterations: 500,
    })
}
