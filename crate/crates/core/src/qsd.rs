//! Quasi-stationary analysis under the Poisson birth-history assumption:
//! Poisson population weights, order-statistic death times, expected lapses,
//! expected size at age, the consistency function `R(B, A)` and its root `B̄(A)`.
//!
//! Every series here is a Poisson mixture, so all truncations go through
//! [`PoissonWindow`], which keeps only the ranks carrying more than
//! `series_tol` of the mass and reports a rigorous bound on what it drops.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{BirthLaw, GrowthLaw, ModelParams};
use crate::numerics::{bracket_decreasing, brent, integrate, GaussPanel, QuadTolerance};
use crate::specfun::{self, ein, exp_integral_e1, ln_factorial};
use crate::tables::{age_grid, invert_increasing};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QsdConfig {
    /// Poisson tail mass dropped by every truncated series.
    pub series_tol: f64,
    /// Relative tolerance of the adaptive quadratures.
    pub quad_tol: f64,
    /// Maximal `|R(B̄, A) - 1|` accepted from the root finder.
    pub root_tol: f64,
    /// Hard cap on the number of retained series terms.
    pub max_terms: usize,
    pub table_points: usize,
}

impl Default for QsdConfig {
    fn default() -> Self {
        Self {
            series_tol: 1e-14,
            quad_tol: 1e-10,
            root_tol: 1e-12,
            max_terms: 1_000_000,
            table_points: 400,
        }
    }
}

impl QsdConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("series_tol", self.series_tol),
            ("quad_tol", self.quad_tol),
            ("root_tol", self.root_tol),
        ] {
            if !(v > 0.0 && v <= 1e-4) {
                return Err(Error::InvalidParams(format!(
                    "{name} must lie in (0, 1e-4], got {v}"
                )));
            }
        }
        if self.table_points < 3 {
            return Err(Error::InvalidParams("table_points must be >= 3".into()));
        }
        Ok(())
    }
}

/// Poisson(λ) probabilities on the contiguous ranks `lo..=hi` outside of which
/// at most `tail_bound` of the mass lies.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonWindow {
    pub lambda: f64,
    pub lo: usize,
    pub pmf: Vec<f64>,
    /// Upper bound on the total mass outside the window.
    pub tail_bound: f64,
}

impl PoissonWindow {
    pub fn new(lambda: f64, tol: f64, cap: usize) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(domain(format!(
                "Poisson mean must be finite and >= 0, got {lambda}"
            )));
        }
        if lambda == 0.0 {
            return Ok(Self {
                lambda,
                lo: 0,
                pmf: vec![1.0],
                tail_bound: 0.0,
            });
        }
        let mode = lambda.floor() as usize;
        if mode > cap {
            return Err(Error::TruncationFailure { cap });
        }
        let at_mode = log_poisson(mode, lambda).exp();
        let half = 0.5 * tol;

        let mut upper = vec![at_mode];
        let mut k = mode;
        let upper_bound = loop {
            let next = upper[upper.len() - 1] * lambda / (k + 1) as f64;
            // Σ_{j>k} p_j ≤ p_{k+1} / (1 - λ/(k+2)) once k + 2 > λ
            let ratio = lambda / (k + 2) as f64;
            if ratio < 1.0 {
                let bound = next / (1.0 - ratio);
                if bound < half {
                    break bound;
                }
            }
            if k + 1 > cap {
                return Err(Error::TruncationFailure { cap });
            }
            upper.push(next);
            k += 1;
        };

        let mut lower = Vec::new();
        let mut lo = mode;
        let mut current = at_mode;
        let lower_bound = loop {
            if lo == 0 {
                break 0.0;
            }
            let prev = current * lo as f64 / lambda;
            // Σ_{j<lo} p_j ≤ p_{lo-1} / (1 - (lo-1)/λ)
            let bound = prev / (1.0 - (lo - 1) as f64 / lambda);
            if bound < half {
                break bound;
            }
            lower.push(prev);
            current = prev;
            lo -= 1;
        };
        lower.reverse();
        lower.extend(upper);
        Ok(Self {
            lambda,
            lo,
            pmf: lower,
            tail_bound: lower_bound + upper_bound,
        })
    }

    pub fn hi(&self) -> usize {
        self.lo + self.pmf.len() - 1
    }

    pub fn prob(&self, k: usize) -> f64 {
        if k < self.lo || k > self.hi() {
            0.0
        } else {
            self.pmf[k - self.lo]
        }
    }

    /// `(C, T)` with `C[i] = P(N ≤ lo + i)` and `T[i] = P(N > lo + i)`. The
    /// tail is accumulated from the end where its terms are small.
    fn cdf_tables(&self) -> (Vec<f64>, Vec<f64>) {
        let len = self.pmf.len();
        let cdf: Vec<f64> = self
            .pmf
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let mut tail = vec![0.0; len];
        let mut acc = 0.0;
        for i in (0..len).rev() {
            tail[i] = acc;
            acc += self.pmf[i];
        }
        (cdf, tail)
    }
}

fn log_poisson(k: usize, lambda: f64) -> f64 {
    k as f64 * lambda.ln() - lambda - ln_factorial(k as u64)
}

/// Indexable Poisson CDF and survival function built from a window.
struct PoissonCdf {
    lo: usize,
    cdf: Vec<f64>,
    tail: Vec<f64>,
}

impl PoissonCdf {
    fn new(w: &PoissonWindow) -> Self {
        let (cdf, tail) = w.cdf_tables();
        Self {
            lo: w.lo,
            cdf,
            tail,
        }
    }

    fn cdf(&self, j: usize) -> f64 {
        if j < self.lo {
            0.0
        } else {
            self.cdf.get(j - self.lo).copied().unwrap_or(1.0)
        }
    }

    fn tail(&self, j: usize) -> f64 {
        if j < self.lo {
            1.0
        } else {
            self.tail.get(j - self.lo).copied().unwrap_or(0.0)
        }
    }
}

/// `p_k = (B/μ)^k e^{-B/μ} / k!`.
pub fn poisson_weight(k: usize, b: f64, mu: f64) -> Result<f64> {
    if !(b >= 0.0) || !(mu > 0.0) {
        return Err(domain(format!(
            "need B >= 0 and mu > 0, got B = {b}, mu = {mu}"
        )));
    }
    let x = b / mu;
    if x == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    Ok(log_poisson(k, x).exp())
}

/// Density of `Y_j^k`, the time of the `j`-th death among `k` individuals with
/// independent Exp(μ) lifetimes.
pub fn death_time_density(j: usize, k: usize, mu: f64, y: f64) -> Result<f64> {
    if k == 0 || j == 0 || j > k {
        return Err(domain(format!(
            "death index out of range: j = {j}, k = {k}"
        )));
    }
    if y <= 0.0 {
        return Ok(0.0);
    }
    let log = ln_factorial(k as u64) - ln_factorial((j - 1) as u64) - ln_factorial((k - j) as u64)
        + mu.ln()
        - (k - j + 1) as f64 * mu * y
        + (j - 1) as f64 * (-(-mu * y).exp_m1()).ln();
    Ok(log.exp())
}

fn lapse_tol() -> QuadTolerance {
    QuadTolerance::new(1e-15, 1e-12)
}

/// `l_m^k(τ)`: expected time within `[0, τ]` during which exactly `m` of the
/// `k` individuals present at the focal birth are still alive.
pub fn lapse_expectation(m: usize, k: usize, tau: f64, mu: f64) -> Result<f64> {
    if m > k {
        return Err(domain(format!("survivors m = {m} exceed cohort k = {k}")));
    }
    if !(tau >= 0.0) {
        return Err(domain(format!("tau must be >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    if k == 0 {
        return Ok(tau);
    }
    if m == k {
        let rate = m as f64 * mu;
        return Ok(-(-rate * tau).exp_m1() / rate);
    }
    let j = k - m;
    let density = |y: f64| death_time_density(j, k, mu, y).unwrap_or(0.0);
    if m == 0 {
        return integrate(|y| (tau - y) * density(y), 0.0, tau, &lapse_tol());
    }
    let rate = m as f64 * mu;
    let integral = integrate(
        |y| -(-rate * (tau - y)).exp_m1() * density(y),
        0.0,
        tau,
        &lapse_tol(),
    )?;
    Ok(integral / rate)
}

/// `s_k(τ) = x_m + Σ_m g_m l_m^k(τ)`: expected size at age `τ` of an
/// individual born into a population of `k`.
pub fn size_at_age_given_cohort(k: usize, tau: f64, params: &ModelParams) -> Result<f64> {
    let mut s = params.x_m;
    for m in 0..=k {
        s += params.g_rank(m) * lapse_expectation(m, k, tau, params.mu)?;
    }
    Ok(s)
}

/// Same quantity as [`size_at_age_given_cohort`], integrating the expected
/// growth rate `E[g(Bin(k, e^{-μt}) / A)]` over `[0, τ]` instead.
pub fn size_at_age_given_cohort_binomial(k: usize, tau: f64, params: &ModelParams) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(domain(format!("tau must be >= 0, got {tau}")));
    }
    let mu = params.mu;
    let growth = integrate(
        |t| binomial_mean_growth(k, (-mu * t).exp(), params),
        0.0,
        tau,
        &lapse_tol(),
    )?;
    Ok(params.x_m + growth)
}

/// `E[g(M / A)]` with `M ~ Bin(k, p)`.
fn binomial_mean_growth(k: usize, p: f64, params: &ModelParams) -> f64 {
    if k == 0 || p <= 0.0 {
        return params.g0();
    }
    if p >= 1.0 {
        return params.g_rank(k);
    }
    let mode = (((k + 1) as f64 * p).floor() as usize).min(k);
    let odds = p / (1.0 - p);
    let log_mode =
        ln_factorial(k as u64) - ln_factorial(mode as u64) - ln_factorial((k - mode) as u64)
            + mode as f64 * p.ln()
            + (k - mode) as f64 * (-p).ln_1p();
    let at_mode = log_mode.exp();
    let cutoff = 1e-18 * at_mode;
    let mut acc = at_mode * params.g_rank(mode);
    let mut w = at_mode;
    for i in mode..k {
        w *= (k - i) as f64 / (i + 1) as f64 * odds;
        if w < cutoff {
            break;
        }
        acc += w * params.g_rank(i + 1);
    }
    let mut w = at_mode;
    for i in (1..=mode).rev() {
        w *= i as f64 / ((k - i + 1) as f64 * odds);
        if w < cutoff {
            break;
        }
        acc += w * params.g_rank(i - 1);
    }
    acc
}

/// `s̄(a; B) = x_m + (1/μ) Σ_m g_m [Γ(m, y) - Γ(m, B/μ)] / m!` with
/// `y = (B/μ) e^{-μa}`, the expected size at age over Poisson(B/μ) cohorts.
pub fn mean_size_at_age(a: f64, b: f64, params: &ModelParams, cfg: &QsdConfig) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(domain(format!("age must be >= 0, got {a}")));
    }
    if !(b > 0.0) {
        return Err(domain(format!("birth rate must be > 0, got {b}")));
    }
    if a == 0.0 {
        return Ok(params.x_m);
    }
    let mu = params.mu;
    let big_x = b / mu;
    let y = big_x * (-mu * a).exp();

    // m = 0: E1(y) - E1(X) = μa - (Ein(X) - Ein(y)), whichever cancels less
    let e1_diff = if y <= 1.0 {
        let ein_y = if y > 0.0 { ein(y)? } else { 0.0 };
        mu * a - (ein(big_x)? - ein_y)
    } else {
        exp_integral_e1(y)? - exp_integral_e1(big_x)?
    };
    let mut acc = params.g_rank(0) * e1_diff;

    // m ≥ 1: Γ(m, x)/m! = P(Poisson(x) ≤ m-1) / m
    let wx = PoissonWindow::new(big_x, cfg.series_tol, cfg.max_terms)?;
    let wy = PoissonWindow::new(y, cfg.series_tol, cfg.max_terms)?;
    let (cx, cy) = (PoissonCdf::new(&wx), PoissonCdf::new(&wy));
    for j in wy.lo..=wx.hi() {
        let c_y = cy.cdf(j);
        let d = if c_y <= 0.5 {
            c_y - cx.cdf(j)
        } else {
            cx.tail(j) - cy.tail(j)
        };
        let m = j + 1;
        acc += params.g_rank(m) * d / m as f64;
    }
    Ok(params.x_m + acc / mu)
}

/// Term-wise age derivative of [`mean_size_at_age`]: `Σ_m g_m P(Poisson(y) = m)`.
pub fn mean_growth_at_age(a: f64, b: f64, params: &ModelParams, cfg: &QsdConfig) -> Result<f64> {
    if !(a >= 0.0) || !(b > 0.0) {
        return Err(domain(format!(
            "need a >= 0 and B > 0, got a = {a}, B = {b}"
        )));
    }
    let y = b / params.mu * (-params.mu * a).exp();
    poisson_mean_growth(y, params, cfg)
}

/// `E[g(N / A)]` with `N ~ Poisson(x)`.
fn poisson_mean_growth(x: f64, params: &ModelParams, cfg: &QsdConfig) -> Result<f64> {
    let w = PoissonWindow::new(x, cfg.series_tol, cfg.max_terms)?;
    Ok(w.pmf
        .iter()
        .enumerate()
        .map(|(i, p)| p * params.g_rank(w.lo + i))
        .sum())
}

/// Sum of `g_m P(Poisson(x) > m)` over all `m`, together with the window used.
fn growth_tail_sum(x: f64, params: &ModelParams, cfg: &QsdConfig) -> Result<(f64, PoissonWindow)> {
    let w = PoissonWindow::new(x, cfg.series_tol, cfg.max_terms)?;
    let c = PoissonCdf::new(&w);
    let mut acc: f64 = (0..w.lo).map(|m| params.g_rank(m)).sum();
    for m in w.lo..w.hi() {
        acc += params.g_rank(m) * c.tail(m);
    }
    Ok((acc, w))
}

/// `R(B, A) = β0 ∫_0^∞ s̄(a; B) e^{-μa} da`, evaluated as
/// `β0 x_m/μ + β0/(μ² X) Σ_m g_m P(Poisson(X) > m)` with `X = B/μ`.
pub fn r_qsd(b: f64, params: &ModelParams, cfg: &QsdConfig) -> Result<f64> {
    if !(b > 0.0) {
        return Err(domain(format!("birth rate must be > 0, got {b}")));
    }
    let beta0 = params.beta0()?;
    let mu = params.mu;
    let big_x = b / mu;
    let (sum, _) = growth_tail_sum(big_x, params, cfg)?;
    Ok(beta0 * params.x_m / mu + beta0 / (mu * mu * big_x) * sum)
}

/// `R(B, A) = (μ/B) ∫_0^{B/μ} f(x, A) dx` by adaptive quadrature of the
/// Poisson-mixture integrand `f(x, A) = (β0/μ²) E[g(Poisson(x)/A)]`.
pub fn r_qsd_quadrature(b: f64, params: &ModelParams, cfg: &QsdConfig) -> Result<f64> {
    if !(b > 0.0) {
        return Err(domain(format!("birth rate must be > 0, got {b}")));
    }
    let beta0 = params.beta0()?;
    let mu = params.mu;
    let big_x = b / mu;
    let err = std::cell::RefCell::new(None);
    let integral = integrate(
        |x| match poisson_mean_growth(x, params, cfg) {
            Ok(v) => v,
            Err(e) => {
                *err.borrow_mut() = Some(e);
                0.0
            }
        },
        0.0,
        big_x,
        &QuadTolerance::new(1e-4 * cfg.quad_tol, cfg.quad_tol),
    );
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(beta0 * params.x_m / mu + beta0 / (mu * mu * big_x) * integral?)
}

/// Quasi-stationary birth rate with tabulated size profile and size density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsdSolution {
    pub bbar: f64,
    pub area: f64,
    pub r0: f64,
    pub residual: f64,
    /// Largest retained Poisson rank at `B̄/μ`.
    pub truncation_k: usize,
    /// Bound on the Poisson mass dropped at `B̄/μ`.
    pub tail_bound: f64,
    pub ages: Vec<f64>,
    pub sizes: Vec<f64>,
    pub survival: Vec<f64>,
    /// `Ū` evaluated at `sizes`.
    pub densities: Vec<f64>,
}

impl QsdSolution {
    pub fn age_at_size(&self, x: f64, params: &ModelParams, cfg: &QsdConfig) -> Result<f64> {
        if x < params.x_m {
            return Err(domain(format!(
                "size {x} is below the birth size {}",
                params.x_m
            )));
        }
        invert_increasing(&self.ages, &self.sizes, x, |a| {
            mean_size_at_age(a, self.bbar, params, cfg)
        })
    }

    /// Fraction of the quasi-stationary population with size at most `x`.
    pub fn size_cdf(&self, x: f64, params: &ModelParams, cfg: &QsdConfig) -> Result<f64> {
        if x <= params.x_m {
            return Ok(0.0);
        }
        Ok(-(-params.mu * self.age_at_size(x, params, cfg)?).exp_m1())
    }
}

fn check_r0(params: &ModelParams) -> Result<f64> {
    let r0 = params.r0()?;
    if r0 <= 1.0 {
        return Err(Error::NoPositiveEquilibrium { r0 });
    }
    Ok(r0)
}

/// Unique `B̄ > 0` with `R(B̄, A) = 1` for linear fertility, `A = params.area`.
pub fn solve_bbar(params: &ModelParams, cfg: &QsdConfig) -> Result<QsdSolution> {
    params.validate()?;
    cfg.validate()?;
    params.beta0()?;
    let r0 = check_r0(params)?;
    let mu = params.mu;
    let residual = |b: f64| r_qsd(b, params, cfg).map(|r| r - 1.0);
    let bracket = bracket_decreasing(residual, mu, 4.0, 1e-12 * mu, 1e15 * mu)?;
    let bbar = root_in_bracket(residual, bracket.lo, bracket.hi)?;
    let res = residual(bbar)?.abs();
    if res > cfg.root_tol {
        return Err(Error::NoConvergence {
            what: "quasi-stationary birth rate",
            iterations: 500,
        });
    }
    finish(bbar, r0, res, params, cfg)
}

/// Tables and truncation report for a birth rate found by another route,
/// such as the closed form.
pub fn solution_at(bbar: f64, params: &ModelParams, cfg: &QsdConfig) -> Result<QsdSolution> {
    params.validate()?;
    cfg.validate()?;
    if !(bbar > 0.0 && bbar.is_finite()) {
        return Err(domain(format!("birth rate must be > 0, got {bbar}")));
    }
    let r0 = params.r0()?;
    let res = (r_qsd(bbar, params, cfg)? - 1.0).abs();
    finish(bbar, r0, res, params, cfg)
}

fn root_in_bracket<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64) -> Result<f64> {
    let mut err = None;
    let root = brent(
        |b| match f(b) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                0.0
            }
        },
        lo,
        hi,
        4.0 * f64::EPSILON * hi,
        500,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(root),
    }
}

fn finish(
    bbar: f64,
    r0: f64,
    residual: f64,
    params: &ModelParams,
    cfg: &QsdConfig,
) -> Result<QsdSolution> {
    let mu = params.mu;
    let window = PoissonWindow::new(bbar / mu, cfg.series_tol, cfg.max_terms)?;
    let ages = age_grid(mu, cfg.table_points);
    let sizes = ages
        .iter()
        .map(|&a| mean_size_at_age(a, bbar, params, cfg))
        .collect::<Result<Vec<_>>>()?;
    let survival: Vec<f64> = ages.iter().map(|&a| (-mu * a).exp()).collect();
    let densities = ages
        .iter()
        .zip(&survival)
        .map(|(&a, &surv)| Ok(bbar * surv / mean_growth_at_age(a, bbar, params, cfg)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(QsdSolution {
        bbar,
        area: params.area,
        r0,
        residual,
        truncation_k: window.hi(),
        tail_bound: window.tail_bound,
        ages,
        sizes,
        survival,
        densities,
    })
}

const COHORT_PANELS_PER_LIFETIME: f64 = 2.0;
const COHORT_HORIZON_LIFETIMES: f64 = 40.0;

/// Lifetime offspring `c_k = ∫_0^∞ β(s_k(a)) e^{-μa} da` of an individual born
/// into a population of `k`, cached by `k`. None of these depend on `B`.
struct CohortOffspring<'a> {
    params: &'a ModelParams,
    panel: GaussPanel,
    width: f64,
    n_panels: usize,
    cache: Vec<f64>,
}

impl<'a> CohortOffspring<'a> {
    fn new(params: &'a ModelParams) -> Self {
        let width = 1.0 / (COHORT_PANELS_PER_LIFETIME * params.mu);
        let n_panels = (COHORT_HORIZON_LIFETIMES * COHORT_PANELS_PER_LIFETIME) as usize;
        Self {
            params,
            panel: GaussPanel::new(16),
            width,
            n_panels,
            cache: Vec::new(),
        }
    }

    fn get(&mut self, k: usize) -> f64 {
        while self.cache.len() <= k {
            let next = self.compute(self.cache.len());
            self.cache.push(next);
        }
        self.cache[k]
    }

    fn compute(&self, k: usize) -> f64 {
        let p = self.params;
        let (h, mu) = (self.width, p.mu);
        let n = self.panel.nodes.len();
        let mut size = p.x_m;
        let mut acc = 0.0;
        let mut rates = vec![0.0; n];
        for panel in 0..self.n_panels {
            let a0 = panel as f64 * h;
            for (r, &t) in rates.iter_mut().zip(&self.panel.nodes) {
                *r = binomial_mean_growth(k, (-mu * (a0 + t * h)).exp(), p);
            }
            for i in 0..n {
                let s_i = size
                    + h * (0..n)
                        .map(|j| self.panel.cumulative[i][j] * rates[j])
                        .sum::<f64>();
                let a = a0 + self.panel.nodes[i] * h;
                acc += h * self.panel.weights[i] * p.beta(s_i) * (-mu * a).exp();
            }
            size += h
                * (0..n)
                    .map(|j| self.panel.weights[j] * rates[j])
                    .sum::<f64>();
        }
        acc
    }

    /// `Σ_k p_k(B) c_k - 1`.
    fn residual(&mut self, b: f64, cfg: &QsdConfig) -> Result<f64> {
        let w = PoissonWindow::new(b / self.params.mu, cfg.series_tol, cfg.max_terms)?;
        let mut acc = 0.0;
        for (i, p) in w.pmf.iter().enumerate() {
            acc += p * self.get(w.lo + i);
        }
        Ok(acc - 1.0)
    }
}

const GENERAL_SCAN_POINTS: usize = 60;

/// Root of `1 = Σ_k p_k(B) ∫_0^∞ β(s_k(a)) e^{-μa} da` for any nondecreasing
/// fertility. Uniqueness is only guaranteed for linear fertility, so the
/// residual is scanned on a log grid first and more than one sign change is
/// reported as an error.
pub fn solve_bbar_general(params: &ModelParams, cfg: &QsdConfig) -> Result<QsdSolution> {
    params.validate()?;
    cfg.validate()?;
    let mu = params.mu;
    let b_min = 1e-3 * mu;
    let b_max = 1e12 * mu;
    if params.birth.is_identically_zero() {
        return Err(Error::NoRootInBracket {
            lo: b_min,
            hi: b_max,
        });
    }
    if let BirthLaw::Constant { rate } = params.birth {
        let residual = rate / mu - 1.0;
        if residual == 0.0 {
            return Err(Error::DegenerateEquation { residual });
        }
        return Err(Error::NoRootInBracket {
            lo: b_min,
            hi: b_max,
        });
    }
    let r0 = params.r0()?;
    let mut offspring = CohortOffspring::new(params);
    // c_k is nonincreasing in k, so the residual is nonincreasing in B
    if offspring.residual(b_min, cfg)? <= 0.0 {
        return Err(Error::NoRootInBracket {
            lo: b_min,
            hi: b_max,
        });
    }
    let mut f = |b: f64| offspring.residual(b, cfg);
    let bracket = bracket_decreasing(&mut f, mu, 4.0, b_min, b_max)?;

    let scan_hi = 4.0 * bracket.hi;
    let step = (scan_hi / b_min).ln() / (GENERAL_SCAN_POINTS - 1) as f64;
    let mut changes = 0;
    let mut prev = f(b_min)?;
    for i in 1..GENERAL_SCAN_POINTS {
        let v = f(b_min * (step * i as f64).exp())?;
        if (v > 0.0) != (prev > 0.0) {
            changes += 1;
        }
        prev = v;
    }
    if changes > 1 {
        return Err(Error::MultipleRootsDetected { count: changes });
    }

    let cell = std::cell::RefCell::new(offspring);
    let bbar = root_in_bracket(
        |b| cell.borrow_mut().residual(b, cfg),
        bracket.lo,
        bracket.hi,
    )?;
    let res = cell.borrow_mut().residual(bbar, cfg)?.abs();
    finish(bbar, r0, res, params, cfg)
}

/// Whether `g_m = g0/(1 + m)`, the case with closed-form quasi-stationary solution.
fn unit_hyperbolic(params: &ModelParams) -> Option<f64> {
    match params.growth {
        GrowthLaw::Hyperbolic { g0, z0 } if ((z0 * params.area) - 1.0).abs() <= 1e-12 => Some(g0),
        _ => None,
    }
}

/// Residual `Ein(x)/x - 1/R0` of the closed-form equation for `B̄/μ` when
/// `g_m = g0/(1+m)`, where `Ein(x) = γ + ln x + Γ(0, x)`.
pub fn closed_form_bbar_eq(x: f64, r0: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(domain(format!("x must be > 0, got {x}")));
    }
    Ok(ein(x)? / x - 1.0 / r0)
}

/// `B̄ = μ x*` with `x*` the root of [`closed_form_bbar_eq`]. Requires linear
/// fertility, `x_m = 0` and hyperbolic growth with `z0 · A = 1`.
pub fn closed_form_bbar(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    params.beta0()?;
    if unit_hyperbolic(params).is_none() || params.x_m != 0.0 {
        return Err(Error::InvalidParams(
            "closed form needs hyperbolic growth with z0 * area = 1 and x_m = 0".into(),
        ));
    }
    let r0 = check_r0(params)?;
    let bracket = bracket_decreasing(|x| closed_form_bbar_eq(x, r0), 1.0, 4.0, 1e-300, 1e300)?;
    let x = root_in_bracket(|x| closed_form_bbar_eq(x, r0), bracket.lo, bracket.hi)?;
    Ok(params.mu * x)
}

/// `Ū(x) = (B̄/μ) ν(a) / s̄'(a)` with `a = s̄^{-1}(x)` and `ν(a) = μ e^{-μa}`.
pub fn size_density_qsd(
    x: f64,
    sol: &QsdSolution,
    params: &ModelParams,
    cfg: &QsdConfig,
) -> Result<f64> {
    let a = sol.age_at_size(x, params, cfg)?;
    Ok(sol.bbar * (-params.mu * a).exp() / mean_growth_at_age(a, sol.bbar, params, cfg)?)
}

/// Closed form of [`size_density_qsd`] when `g_m = g0/(1+m)`:
/// `Ū(x) = (μ/g0) t² / (1 - e^{-t})` with `t = F^{-1}(μ(x - x_m)/g0 + F(B̄/μ))`.
pub fn size_density_qsd_closed_form(x: f64, bbar: f64, params: &ModelParams) -> Result<f64> {
    let g0 = unit_hyperbolic(params).ok_or_else(|| {
        Error::InvalidParams("closed form needs hyperbolic growth with z0 * area = 1".into())
    })?;
    if x < params.x_m {
        return Err(domain(format!(
            "size {x} is below the birth size {}",
            params.x_m
        )));
    }
    let mu = params.mu;
    let t = specfun::f_inverse(mu * (x - params.x_m) / g0 + specfun::f_func(bbar / mu)?)?;
    Ok(mu / g0 * t * t / -(-t).exp_m1())
}

/// Both sides of an identity and their absolute difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
}

impl IdentityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            abs_err: (lhs - rhs).abs(),
        }
    }
}

/// `Σ_{k≥m} p_k l_m^k(τ)` against `[Γ(m, (B/μ)e^{-μτ}) - Γ(m, B/μ)] / (μ m!)`.
pub fn identity_apsum_pkl(
    m: usize,
    tau: f64,
    b: f64,
    mu: f64,
    cfg: &QsdConfig,
) -> Result<IdentityCheck> {
    if !(tau >= 0.0) || !(b > 0.0) {
        return Err(domain(format!(
            "need tau >= 0 and B > 0, got tau = {tau}, B = {b}"
        )));
    }
    let big_x = b / mu;
    let w = PoissonWindow::new(big_x, cfg.series_tol, cfg.max_terms)?;
    let mut lhs = 0.0;
    for k in m.max(w.lo)..=w.hi().max(m) {
        lhs += w.prob(k) * lapse_expectation(m, k, tau, mu)?;
    }
    let y = big_x * (-mu * tau).exp();
    let rhs = if tau == 0.0 {
        0.0
    } else if m == 0 {
        (exp_integral_e1(y)? - exp_integral_e1(big_x)?) / mu
    } else {
        let s = m as f64;
        (specfun::regularized_gamma_q(s, y)? - specfun::regularized_gamma_q(s, big_x)?) / (mu * s)
    };
    Ok(IdentityCheck::new(lhs, rhs))
}

/// `Σ_{k≥m+1} p_k f_{Y_{k-m}^k}(y)` against
/// `(B/μ)^m / m! · e^{-(m+1)μy} · B e^{-(B/μ) e^{-μy}}`.
pub fn mixture_density_identity(
    m: usize,
    y: f64,
    b: f64,
    mu: f64,
    cfg: &QsdConfig,
) -> Result<IdentityCheck> {
    if !(b > 0.0) || !(mu > 0.0) {
        return Err(domain(format!(
            "need B > 0 and mu > 0, got B = {b}, mu = {mu}"
        )));
    }
    if y <= 0.0 {
        return Ok(IdentityCheck::new(0.0, 0.0));
    }
    let big_x = b / mu;
    let w = PoissonWindow::new(big_x, cfg.series_tol, cfg.max_terms)?;
    let mut lhs = 0.0;
    for k in (m + 1).max(w.lo)..=w.hi().max(m + 1) {
        lhs += w.prob(k) * death_time_density(k - m, k, mu, y)?;
    }
    let log_rhs = m as f64 * big_x.ln() - ln_factorial(m as u64) - (m + 1) as f64 * mu * y + b.ln()
        - big_x * (-mu * y).exp();
    Ok(IdentityCheck::new(lhs, log_rhs.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_to_infinity;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> QsdConfig {
        QsdConfig::default()
    }

    fn params(z0: f64, beta0: f64, area: f64) -> ModelParams {
        ModelParams::hyperbolic_linear(1.0, 10.0, z0, beta0, area)
    }

    #[test]
    fn poisson_weight_examples() {
        assert!((poisson_weight(0, 2.0, 1.0).unwrap() - (-2f64).exp()).abs() < 1e-15);
        assert!((poisson_weight(3, 2.0, 1.0).unwrap() - 8.0 * (-2f64).exp() / 6.0).abs() < 1e-15);
    }

    #[test]
    fn window_mass_and_bound() {
        for &lam in &[1e-8, 0.3, 2.0, 17.5, 400.0, 30000.0] {
            let w = PoissonWindow::new(lam, 1e-14, 1_000_000).unwrap();
            let mass: f64 = w.pmf.iter().sum();
            assert!(mass >= 1.0 - 1e-14 - 1e-12, "lambda {lam}: mass {mass}");
            assert!(w.tail_bound < 1e-14);
            // brute-force outside mass in log space
            let outside: f64 = (0..w.lo)
                .chain(w.hi() + 1..w.hi() + 2000)
                .map(|k| log_poisson(k, lam).exp())
                .sum();
            assert!(outside <= w.tail_bound * (1.0 + 1e-9) + 1e-300);
        }
        assert!(matches!(
            PoissonWindow::new(1e7, 1e-14, 1000),
            Err(Error::TruncationFailure { cap: 1000 })
        ));
    }

    #[test]
    fn death_time_density_exponential_case_and_normalization() {
        for &y in &[0.1, 1.0, 3.0] {
            let d = death_time_density(1, 4, 1.5, y).unwrap();
            assert!((d - 6.0 * (-6.0 * y).exp()).abs() < 1e-13);
        }
        assert_eq!(death_time_density(2, 3, 1.0, -0.5).unwrap(), 0.0);
        assert!(death_time_density(4, 3, 1.0, 1.0).is_err());
        for &(j, k) in &[(1, 1), (2, 3), (5, 5)] {
            let total = integrate_to_infinity(
                |y| death_time_density(j, k, 1.0, y).unwrap(),
                0.0,
                &QuadTolerance::new(1e-13, 1e-11),
            )
            .unwrap();
            assert!((total - 1.0).abs() < 1e-8, "({j},{k}): {total}");
        }
    }

    #[test]
    fn death_time_density_matches_order_statistics() {
        let (j, k, mu) = (2, 5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| {
                let mut life: Vec<f64> = (0..k)
                    .map(|_| -(1.0 - rng.gen::<f64>()).ln() / mu)
                    .collect();
                life.sort_by(f64::total_cmp);
                life[j - 1]
            })
            .collect();
        draws.sort_by(f64::total_cmp);
        let tol = QuadTolerance::new(1e-13, 1e-11);
        let mut cdf = 0.0;
        let mut prev = 0.0;
        let mut ks: f64 = 0.0;
        for q in 1..100 {
            let x = draws[q * n / 100];
            cdf += integrate(|y| death_time_density(j, k, mu, y).unwrap(), prev, x, &tol).unwrap();
            prev = x;
            let ecdf = draws.partition_point(|&d| d <= x) as f64 / n as f64;
            ks = ks.max((ecdf - cdf).abs());
        }
        assert!(ks < 0.01, "ks = {ks}");
    }

    #[test]
    fn lapse_examples() {
        assert!((lapse_expectation(1, 1, 1.0, 1.0).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-15);
        for k in 0..6 {
            for m in 0..=k {
                assert_eq!(lapse_expectation(m, k, 0.0, 1.0).unwrap(), 0.0);
            }
        }
        assert!(lapse_expectation(3, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn lapses_partition_the_interval() {
        for &k in &[1, 2, 5, 12] {
            for &tau in &[0.3, 1.0, 4.0] {
                let total: f64 = (0..=k)
                    .map(|m| lapse_expectation(m, k, tau, 0.7).unwrap())
                    .sum();
                assert!((total - tau).abs() < 1e-8, "k={k} tau={tau}: {total}");
            }
        }
    }

    #[test]
    fn cohort_size_small_cases() {
        let p = params(1.0, 1.0, 1.0);
        assert!((size_at_age_given_cohort(0, 2.5, &p).unwrap() - 25.0).abs() < 1e-12);
        // k = 1: g1 until the older one dies at Exp(μ), then g0
        let tau: f64 = 1.3;
        let survive = 1.0 - (-tau).exp();
        let expected = 5.0 * survive + 10.0 * (tau - survive);
        assert!((size_at_age_given_cohort(1, tau, &p).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn cohort_size_routes_agree_and_decrease_in_k() {
        let p = params(1.0, 1.0, 2.0);
        for &tau in &[0.2, 1.0, 3.0] {
            let mut prev = f64::INFINITY;
            for k in 0..10 {
                let lapse = size_at_age_given_cohort(k, tau, &p).unwrap();
                let binom = size_at_age_given_cohort_binomial(k, tau, &p).unwrap();
                assert!(
                    (lapse - binom).abs() < 1e-9 * lapse.max(1.0),
                    "k={k} tau={tau}"
                );
                assert!(lapse <= prev + 1e-12);
                prev = lapse;
            }
        }
    }

    #[test]
    fn mean_size_matches_direct_gamma_series() {
        // Σ_m g_m [Γ(m,y) - Γ(m,X)] / (μ m!) term by term with specfun
        let p = params(1.0, 1.0, 1.0);
        for &(b, a) in &[(0.5f64, 0.3f64), (3.0, 1.0), (40.0, 0.05), (40.0, 2.0)] {
            let x = b;
            let y = x * (-a).exp();
            let mut direct =
                p.g_rank(0) * (exp_integral_e1(y).unwrap() - exp_integral_e1(x).unwrap());
            for m in 1..400 {
                let s = m as f64;
                let q = specfun::regularized_gamma_q(s, y).unwrap()
                    - specfun::regularized_gamma_q(s, x).unwrap();
                direct += p.g_rank(m) * q / s;
            }
            let series = mean_size_at_age(a, b, &p, &cfg()).unwrap();
            assert!(
                (series - direct).abs() < 1e-11 * direct,
                "b={b} a={a}: {series} vs {direct}"
            );
        }
    }

    #[test]
    fn mean_size_is_cohort_mixture() {
        let p = params(1.0, 1.0, 1.0);
        let b = 3.0;
        let w = PoissonWindow::new(b, 1e-14, 1_000).unwrap();
        for &a in &[0.5, 1.0, 2.0] {
            let mixture: f64 = (w.lo..=w.hi())
                .map(|k| w.prob(k) * size_at_age_given_cohort(k, a, &p).unwrap())
                .sum();
            let series = mean_size_at_age(a, b, &p, &cfg()).unwrap();
            assert!(
                (series - mixture).abs() < 1e-6,
                "a={a}: {series} vs {mixture}"
            );
        }
    }

    #[test]
    fn mean_size_limits_and_monotonicity() {
        let p = params(1.0, 1.0, 1.0);
        assert_eq!(mean_size_at_age(0.0, 5.0, &p, &cfg()).unwrap(), 0.0);
        let lone = mean_size_at_age(1.0, 1e-8, &p, &cfg()).unwrap();
        assert!((lone - 10.0).abs() < 1e-4 * 10.0);
        let ages: Vec<f64> = (1..60).map(|i| 0.1 * i as f64).collect();
        let mut prev_row: Option<Vec<f64>> = None;
        for &b in &[1.0, 10.0, 100.0] {
            let row: Vec<f64> = ages
                .iter()
                .map(|&a| mean_size_at_age(a, b, &p, &cfg()).unwrap())
                .collect();
            assert!(row.windows(2).all(|w| w[1] > w[0]));
            if let Some(prev) = &prev_row {
                assert!(row.iter().zip(prev).all(|(r, q)| r <= q));
            }
            prev_row = Some(row);
        }
    }

    #[test]
    fn mean_growth_is_derivative_of_mean_size() {
        let p = params(5.0, 1.0, 1.0);
        for &a in &[0.1, 1.0, 4.0] {
            let h = 1e-5;
            let fd = (mean_size_at_age(a + h, 30.0, &p, &cfg()).unwrap()
                - mean_size_at_age(a - h, 30.0, &p, &cfg()).unwrap())
                / (2.0 * h);
            let exact = mean_growth_at_age(a, 30.0, &p, &cfg()).unwrap();
            assert!((fd - exact).abs() < 1e-6 * exact);
        }
    }

    #[test]
    fn r_qsd_limits_and_routes() {
        let p = params(1.0, 3.0, 1.0);
        let r0 = p.r0().unwrap();
        assert!((r_qsd(1e-8, &p, &cfg()).unwrap() - r0).abs() < 1e-4 * r0);
        for &b in &[0.01, 1.0, 30.0, 500.0] {
            let series = r_qsd(b, &p, &cfg()).unwrap();
            let quad = r_qsd_quadrature(b, &p, &cfg()).unwrap();
            assert!((series - quad).abs() < 1e-10 * series, "b={b}");
            // β0 ∫ s̄(a) e^{-μa} da
            let tol = QuadTolerance::new(1e-12, 1e-10);
            let via_size = 3.0
                * integrate_to_infinity(
                    |a| mean_size_at_age(a, b, &p, &cfg()).unwrap() * (-a).exp(),
                    0.0,
                    &tol,
                )
                .unwrap();
            assert!(
                (series - via_size).abs() < 1e-6,
                "b={b}: {series} vs {via_size}"
            );
        }
    }

    #[test]
    fn solve_matches_closed_form() {
        let p = params(1.0, 3.0, 1.0);
        let sol = solve_bbar(&p, &cfg()).unwrap();
        let closed = closed_form_bbar(&p).unwrap();
        assert!(
            (sol.bbar - closed).abs() < 1e-8 * closed,
            "{} vs {closed}",
            sol.bbar
        );
        assert!(sol.residual <= 1e-12);
        assert!(sol.bbar > 150.0 && sol.bbar < 200.0);
        let at = solution_at(closed, &p, &cfg()).unwrap();
        assert!(at.residual < 1e-10);
        assert_eq!(at.ages, sol.ages);
        assert!(solution_at(0.0, &p, &cfg()).is_err());
    }

    #[test]
    fn closed_form_equation_shape() {
        let v = closed_form_bbar_eq(1e-6, f64::INFINITY).unwrap();
        assert!(v > 0.999 && v < 1.0);
        // bisection oracle on the monotone left side
        let (mut lo, mut hi) = (1.0, 1e4);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ein(mid).unwrap() / mid > 1.0 / 30.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = closed_form_bbar(&params(1.0, 3.0, 1.0)).unwrap();
        assert!((root - lo).abs() < 1e-9 * lo);
        assert!(closed_form_bbar_eq(0.0, 30.0).is_err());
    }

    #[test]
    fn subcritical_has_no_solution() {
        let p = params(1.0, 0.05, 1.0);
        assert!(matches!(
            solve_bbar(&p, &cfg()),
            Err(Error::NoPositiveEquilibrium { .. })
        ));
    }

    #[test]
    fn general_solver_matches_linear_solver() {
        let p = params(1.0, 3.0, 0.81);
        let linear = solve_bbar(&p, &cfg()).unwrap();
        let general = solve_bbar_general(&p, &cfg()).unwrap();
        assert!((general.bbar - linear.bbar).abs() < 1e-5 * linear.bbar);
    }

    #[test]
    fn general_solver_degenerate_cases() {
        let zero = params(1.0, 0.0, 1.0);
        assert!(matches!(
            solve_bbar_general(&zero, &cfg()),
            Err(Error::NoRootInBracket { .. })
        ));
        let mut constant = params(1.0, 1.0, 1.0);
        constant.birth = BirthLaw::Constant { rate: 1.0 };
        assert!(matches!(
            solve_bbar_general(&constant, &cfg()),
            Err(Error::DegenerateEquation { .. })
        ));
        constant.birth = BirthLaw::Constant { rate: 2.0 };
        assert!(matches!(
            solve_bbar_general(&constant, &cfg()),
            Err(Error::NoRootInBracket { .. })
        ));
    }

    #[test]
    fn general_solver_with_tabulated_fertility() {
        // fertility switched on above size 5, saturating at size 20
        let mut p = params(1.0, 1.0, 1.0);
        p.birth = BirthLaw::Tabulated {
            size: vec![0.0, 5.0, 20.0],
            rate: vec![0.0, 0.0, 6.0],
        };
        let sol = solve_bbar_general(&p, &cfg()).unwrap();
        assert!(sol.bbar > 0.0 && sol.residual < 1e-10);
    }

    #[test]
    fn density_integrates_and_matches_closed_form() {
        let p = params(1.0, 3.0, 1.0);
        let sol = solve_bbar(&p, &cfg()).unwrap();
        for i in (1..sol.ages.len()).step_by(23) {
            let x = sol.sizes[i];
            let generic = size_density_qsd(x, &sol, &p, &cfg()).unwrap();
            let closed = size_density_qsd_closed_form(x, sol.bbar, &p).unwrap();
            assert!(
                (generic - closed).abs() < 1e-6 * closed,
                "x={x}: {generic} vs {closed}"
            );
            assert!((generic - sol.densities[i]).abs() < 1e-8 * closed);
        }
        let x_max = *sol.sizes.last().unwrap();
        let total = integrate(
            |x| size_density_qsd_closed_form(x, sol.bbar, &p).unwrap(),
            0.0,
            x_max,
            &QuadTolerance::new(1e-9, 1e-9),
        )
        .unwrap();
        let expected = sol.bbar / p.mu;
        assert!(
            (total - expected).abs() < 1e-5 * expected,
            "{total} vs {expected}"
        );
    }

    #[test]
    fn pushforward_of_exponential_ages_matches_density() {
        let p = params(5.0, 0.30834, 1.0);
        let sol = solve_bbar(&p, &cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let mut samples: Vec<f64> = (0..n)
            .map(|_| {
                let a = -(1.0 - rng.gen::<f64>()).ln();
                // interpolate the table; exact evaluation at 10^6 points is unnecessary
                let i = sol
                    .ages
                    .partition_point(|&t| t <= a)
                    .clamp(1, sol.ages.len() - 1);
                let t = (a - sol.ages[i - 1]) / (sol.ages[i] - sol.ages[i - 1]);
                sol.sizes[i - 1] + t * (sol.sizes[i] - sol.sizes[i - 1])
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        let tol = QuadTolerance::new(1e-11, 1e-9);
        let norm = p.mu / sol.bbar;
        let (mut cdf, mut prev, mut ks) = (0.0, 0.0, 0.0f64);
        for q in 1..100 {
            let x = samples[q * n / 100];
            cdf += norm
                * integrate(
                    |t| size_density_qsd(t, &sol, &p, &cfg()).unwrap(),
                    prev,
                    x,
                    &tol,
                )
                .unwrap();
            prev = x;
            let ecdf = samples.partition_point(|&s| s <= x) as f64 / n as f64;
            ks = ks.max((ecdf - cdf).abs());
        }
        assert!(ks < 0.01, "ks = {ks}");
    }

    #[test]
    fn apsum_identity_examples() {
        let c = cfg();
        assert!(identity_apsum_pkl(0, 1.0, 2.0, 1.0, &c).unwrap().abs_err < 1e-7);
        assert!(identity_apsum_pkl(3, 0.5, 5.0, 1.0, &c).unwrap().abs_err < 1e-7);
        let zero = identity_apsum_pkl(2, 0.0, 5.0, 1.0, &c).unwrap();
        assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
    }

    #[test]
    fn mixture_identity_examples() {
        let c = cfg();
        let neg = mixture_density_identity(1, -0.2, 2.0, 1.0, &c).unwrap();
        assert_eq!((neg.lhs, neg.rhs), (0.0, 0.0));
        assert!(
            mixture_density_identity(0, 1.0, 2.0, 1.0, &c)
                .unwrap()
                .abs_err
                < 1e-8
        );
        assert!(
            mixture_density_identity(2, 0.3, 5.0, 1.0, &c)
                .unwrap()
                .abs_err
                < 1e-8
        );
    }

    #[test]
    fn doubling_truncation_barely_moves_results() {
        let p = params(1.0, 3.0, 1.0);
        let base = cfg();
        let tight = QsdConfig {
            series_tol: 1e-16,
            ..cfg()
        };
        for &b in &[3.0, 170.0] {
            let r1 = r_qsd(b, &p, &base).unwrap();
            let r2 = r_qsd(b, &p, &tight).unwrap();
            assert!((r1 - r2).abs() < 10.0 * base.series_tol * r1.max(1.0));
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        let bad = QsdConfig {
            root_tol: 1e-3,
            ..cfg()
        };
        assert!(bad.validate().is_err());
    }
}
