//! Stationary state of the deterministic renewal-equation model: the
//! stationary birth rate per unit area `b̄`, the size-at-age profile and the
//! stationary size density.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{GrowthLaw, ModelParams};
use crate::numerics::{bracket_decreasing, brent, integrate, QuadTolerance};
use crate::tables::{age_grid, invert_increasing};

pub const DEFAULT_TABLE_POINTS: usize = 400;

fn quad_tol() -> QuadTolerance {
    QuadTolerance::new(1e-14, 1e-12)
}

/// Stationary deterministic solution together with its tabulated profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetSolution {
    pub bbar: f64,
    pub r0: f64,
    pub residual: f64,
    pub ages: Vec<f64>,
    pub sizes: Vec<f64>,
    pub survival: Vec<f64>,
    /// `ū` evaluated at `sizes`.
    pub densities: Vec<f64>,
}

/// `R0 = ∫_0^∞ β(x_m + g(0) a) e^{-μ a} da`.
pub fn basic_reproduction_number(params: &ModelParams) -> Result<f64> {
    params.r0()
}

/// `s̄_det(a; b) = x_m + ∫_0^a g((b/μ) e^{-μτ}) dτ`, closed form for hyperbolic growth.
pub fn size_at_age_det(a: f64, b: f64, params: &ModelParams) -> Result<f64> {
    check_age_rate(a, b)?;
    match params.growth {
        GrowthLaw::Hyperbolic { g0, z0 } => {
            let mu = params.mu;
            let c = b / (mu * z0);
            // a + (1/μ) ln((1 + c e^{-μa}) / (1 + c))
            let log_ratio = (c * (-mu * a).exp()).ln_1p() - c.ln_1p();
            Ok(params.x_m + g0 * (a + log_ratio / mu))
        }
        GrowthLaw::Tabulated { .. } => size_at_age_det_quadrature(a, b, params),
    }
}

/// Quadrature route to [`size_at_age_det`], valid for any growth law.
pub fn size_at_age_det_quadrature(a: f64, b: f64, params: &ModelParams) -> Result<f64> {
    check_age_rate(a, b)?;
    let mu = params.mu;
    let integral = integrate(|t| params.g(b / mu * (-mu * t).exp()), 0.0, a, &quad_tol())?;
    Ok(params.x_m + integral)
}

/// `d/da s̄_det(a; b) = g((b/μ) e^{-μa})`.
pub fn growth_at_age_det(a: f64, b: f64, params: &ModelParams) -> f64 {
    params.g(b / params.mu * (-params.mu * a).exp())
}

fn check_age_rate(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0) {
        return Err(domain(format!("age must be >= 0, got {a}")));
    }
    if !(b > 0.0) {
        return Err(domain(format!("birth rate must be > 0, got {b}")));
    }
    Ok(())
}

/// `β0 ∫_0^∞ s̄_det(a; b) e^{-μa} da` for linear fertility, which reduces to
/// `β0 x_m/μ + β0/(μ b) ∫_0^{b/μ} g(x) dx`.
pub fn r_det(b: f64, params: &ModelParams) -> Result<f64> {
    if !(b > 0.0) {
        return Err(domain(format!("birth rate must be > 0, got {b}")));
    }
    let beta0 = params.beta0()?;
    let mu = params.mu;
    Ok(beta0 * params.x_m / mu + beta0 / (mu * b) * params.growth.integral(b / mu))
}

/// The `β0` for which the deterministic stationary birth rate equals `target`.
///
/// `r_det` is proportional to `β0`, so one evaluation at `β0 = 1` suffices.
pub fn beta0_for_bbar(target: f64, params: &ModelParams) -> Result<f64> {
    let unit = params.with_beta0(1.0);
    Ok(1.0 / r_det(target, &unit)?)
}

/// Unique `b̄ > 0` with `r_det(b̄) = 1`, with tabulated size profile and density.
pub fn solve_bbar(params: &ModelParams) -> Result<DetSolution> {
    solve_bbar_with(params, DEFAULT_TABLE_POINTS)
}

pub fn solve_bbar_with(params: &ModelParams, table_points: usize) -> Result<DetSolution> {
    params.validate()?;
    params.beta0()?;
    let r0 = params.r0()?;
    if r0 <= 1.0 {
        return Err(Error::NoPositiveEquilibrium { r0 });
    }
    let mu = params.mu;
    let bracket = bracket_decreasing(
        |b| Ok(r_det(b, params)? - 1.0),
        mu,
        4.0,
        1e-12 * mu,
        1e15 * mu,
    )?;
    let bbar = brent(
        |b| r_det(b, params).map(|r| r - 1.0).unwrap_or(f64::NAN),
        bracket.lo,
        bracket.hi,
        4.0 * f64::EPSILON * bracket.hi,
        500,
    )?;
    let residual = (r_det(bbar, params)? - 1.0).abs();

    let ages = age_grid(mu, table_points);
    let sizes = ages
        .iter()
        .map(|&a| size_at_age_det(a, bbar, params))
        .collect::<Result<Vec<_>>>()?;
    let survival: Vec<f64> = ages.iter().map(|&a| (-mu * a).exp()).collect();
    let densities = ages
        .iter()
        .zip(&survival)
        .map(|(&a, &surv)| bbar * surv / growth_at_age_det(a, bbar, params))
        .collect();
    Ok(DetSolution {
        bbar,
        r0,
        residual,
        ages,
        sizes,
        survival,
        densities,
    })
}

impl DetSolution {
    /// Age at which the stationary size profile reaches `x`.
    pub fn age_at_size(&self, x: f64, params: &ModelParams) -> Result<f64> {
        if x < params.x_m {
            return Err(domain(format!(
                "size {x} is below the birth size {}",
                params.x_m
            )));
        }
        invert_increasing(&self.ages, &self.sizes, x, |a| {
            size_at_age_det(a, self.bbar, params)
        })
    }

    /// Fraction of the stationary population with size at most `x`.
    pub fn size_cdf(&self, x: f64, params: &ModelParams) -> Result<f64> {
        if x <= params.x_m {
            return Ok(0.0);
        }
        Ok(-(-params.mu * self.age_at_size(x, params)?).exp_m1())
    }
}

/// `ū(x) = (b̄/μ) ν(a) / s̄_det'(a)` with `a = s̄_det^{-1}(x)` and `ν(a) = μ e^{-μa}`.
pub fn size_density_det(x: f64, sol: &DetSolution, params: &ModelParams) -> Result<f64> {
    let a = sol.age_at_size(x, params)?;
    Ok(sol.bbar * (-params.mu * a).exp() / growth_at_age_det(a, sol.bbar, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BirthLaw;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig2(z0: f64, beta0: f64) -> ModelParams {
        ModelParams::hyperbolic_linear(1.0, 10.0, z0, beta0, 1.0)
    }

    /// β0 making b̄ the stationary rate, from `r_det(b̄) = 1` in closed form.
    fn beta0_oracle(bbar: f64, mu: f64, g0: f64, z0: f64) -> f64 {
        bbar * mu / (g0 * z0 * (1.0 + bbar / (mu * z0)).ln())
    }

    #[test]
    fn r0_examples() {
        assert_eq!(basic_reproduction_number(&fig2(1.0, 3.0)).unwrap(), 30.0);
        assert_eq!(basic_reproduction_number(&fig2(1.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn size_at_age_examples() {
        let p = fig2(1.0, 1.0);
        assert_eq!(size_at_age_det(0.0, 30.0, &p).unwrap(), 0.0);
        let closed = size_at_age_det(2.0, 30.0, &p).unwrap();
        let quad = size_at_age_det_quadrature(2.0, 30.0, &p).unwrap();
        assert!((closed - quad).abs() < 1e-9 * closed);
        let lone = size_at_age_det(1.0, 1e-9, &p).unwrap();
        assert!((lone - 10.0).abs() < 1e-6 * 10.0);
    }

    #[test]
    fn closed_form_matches_quadrature_on_fig2_grid() {
        for &z0 in &[5.0, 1.0, 0.2] {
            let p = fig2(z0, 1.0);
            for &b in &[1.0, 30.0, 300.0] {
                for &a in &[0.01, 0.5, 2.0, 10.0] {
                    let closed = size_at_age_det(a, b, &p).unwrap();
                    let quad = size_at_age_det_quadrature(a, b, &p).unwrap();
                    assert!((closed - quad).abs() < 1e-9 * closed, "z0={z0} b={b} a={a}");
                }
            }
        }
    }

    #[test]
    fn size_at_age_monotonicity() {
        let p = fig2(1.0, 1.0);
        let ages: Vec<f64> = (0..50).map(|i| 0.1 * i as f64).collect();
        for &b in &[3.0, 30.0] {
            let s: Vec<f64> = ages
                .iter()
                .map(|&a| size_at_age_det(a, b, &p).unwrap())
                .collect();
            assert!(s.windows(2).all(|w| w[1] > w[0]));
        }
        for &a in &ages[1..] {
            assert!(size_at_age_det(a, 3.0, &p).unwrap() >= size_at_age_det(a, 30.0, &p).unwrap());
        }
    }

    #[test]
    fn r_det_examples() {
        let p = fig2(1.0, 3.0 / 31f64.ln());
        let r0 = p.r0().unwrap();
        assert!((r_det(1e-8, &p).unwrap() - r0).abs() < 1e-5 * r0);
        assert!(r_det(10.0, &p).unwrap() > r_det(20.0, &p).unwrap());
        assert!((r_det(30.0, &p).unwrap() - 1.0).abs() < 1e-9);
        let nonlinear = ModelParams {
            birth: BirthLaw::Constant { rate: 2.0 },
            ..p
        };
        assert!(matches!(
            r_det(1.0, &nonlinear),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn r_det_strictly_decreasing_on_grid() {
        let p = fig2(0.2, 1.0);
        let vals: Vec<f64> = (0..60)
            .map(|i| r_det(10f64.powf(-3.0 + 0.12 * i as f64), &p).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn solve_bbar_fig2_rows() {
        for &z0 in &[5.0, 1.0, 0.2] {
            let beta0 = beta0_oracle(30.0, 1.0, 10.0, z0);
            let sol = solve_bbar(&fig2(z0, beta0)).unwrap();
            assert!(
                (sol.bbar - 30.0).abs() < 1e-9 * 30.0,
                "z0={z0}: {}",
                sol.bbar
            );
            assert!(sol.residual <= 1e-10);
        }
        // the β0 values quoted for the Fig. 2 rows
        assert!((beta0_oracle(30.0, 1.0, 10.0, 1.0) - 0.87362).abs() < 1e-5);
        assert!((beta0_oracle(30.0, 1.0, 10.0, 5.0) - 0.30834).abs() < 1e-5);
        assert!((beta0_oracle(30.0, 1.0, 10.0, 0.2) - 2.98967).abs() < 1e-5);
        let via_lib = beta0_for_bbar(30.0, &fig2(1.0, 1.0)).unwrap();
        assert!((via_lib - beta0_oracle(30.0, 1.0, 10.0, 1.0)).abs() < 1e-14);
    }

    #[test]
    fn subcritical_has_no_equilibrium() {
        let p = fig2(1.0, 0.09);
        match solve_bbar(&p) {
            Err(Error::NoPositiveEquilibrium { r0 }) => assert!((r0 - 0.9).abs() < 1e-12),
            other => panic!("expected NoPositiveEquilibrium, got {other:?}"),
        }
    }

    #[test]
    fn unique_sign_change_on_log_grid() {
        let p = fig2(1.0, 0.87362);
        let vals: Vec<f64> = (0..80)
            .map(|i| r_det(10f64.powf(-3.0 + 0.1 * i as f64), &p).unwrap() - 1.0)
            .collect();
        let changes = vals
            .windows(2)
            .filter(|w| w[0].signum() != w[1].signum())
            .count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn density_integrates_to_population() {
        let p = fig2(1.0, 0.87362);
        let sol = solve_bbar(&p).unwrap();
        let x_max = *sol.sizes.last().unwrap();
        let total = integrate(
            |x| size_density_det(x, &sol, &p).unwrap(),
            0.0,
            x_max,
            &QuadTolerance::new(1e-10, 1e-9),
        )
        .unwrap();
        let expected = sol.bbar / p.mu;
        assert!(
            (total - expected).abs() < 1e-6 * expected,
            "{total} vs {expected}"
        );
        // a = 0 endpoint: ū(x_m) = b̄ / g(b̄/μ)
        let at_birth = size_density_det(0.0, &sol, &p).unwrap();
        assert!((at_birth - sol.bbar / p.g(sol.bbar / p.mu)).abs() < 1e-12 * at_birth);
        assert!(size_density_det(-1.0, &sol, &p).is_err());
    }

    #[test]
    fn tabulated_density_matches_parametric_form() {
        let p = fig2(5.0, 0.30834);
        let sol = solve_bbar(&p).unwrap();
        for i in (1..sol.ages.len()).step_by(37) {
            let d = size_density_det(sol.sizes[i], &sol, &p).unwrap();
            assert!((d - sol.densities[i]).abs() < 1e-8 * sol.densities[i]);
        }
    }

    #[test]
    fn pushforward_of_exponential_ages_matches_density() {
        let p = fig2(1.0, 0.87362);
        let sol = solve_bbar(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut samples: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let a = -(1.0 - u).ln() / p.mu;
                size_at_age_det(a, sol.bbar, &p).unwrap()
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        // model CDF by quadrature of ū on a quantile grid
        let tol = QuadTolerance::new(1e-12, 1e-10);
        let norm = p.mu / sol.bbar;
        let mut cdf = 0.0;
        let mut prev = 0.0;
        let mut ks: f64 = 0.0;
        for q in 1..200 {
            let x = samples[q * n / 200];
            cdf += norm
                * integrate(|t| size_density_det(t, &sol, &p).unwrap(), prev, x, &tol).unwrap();
            prev = x;
            let ecdf = samples.partition_point(|&s| s <= x) as f64 / n as f64;
            ks = ks.max((ecdf - cdf).abs());
        }
        assert!(ks < 0.01, "ks = {ks}");
    }
}
