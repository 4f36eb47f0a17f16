//! Model ingredients shared by the deterministic analysis, the
//! quasi-stationary analysis and the simulator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_to_infinity, QuadTolerance};

fn default_tail_epsilon() -> f64 {
    1e-3
}

/// Individual growth rate as a function of the density of larger individuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GrowthLaw {
    /// `g(z) = g0 / (1 + z / z0)`.
    Hyperbolic { g0: f64, z0: f64 },
    /// Piecewise-linear interpolation of decreasing samples, held constant past
    /// the last density. The last rate must lie below `tail_epsilon`.
    Tabulated {
        density: Vec<f64>,
        rate: Vec<f64>,
        #[serde(default = "default_tail_epsilon")]
        tail_epsilon: f64,
    },
}

impl GrowthLaw {
    pub fn hyperbolic(g0: f64, z0: f64) -> Self {
        GrowthLaw::Hyperbolic { g0, z0 }
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self {
            GrowthLaw::Hyperbolic { g0, z0 } => g0 / (1.0 + z / z0),
            GrowthLaw::Tabulated { density, rate, .. } => interpolate(density, rate, z),
        }
    }

    pub fn g0(&self) -> f64 {
        self.eval(0.0)
    }

    /// `∫_0^x g(z) dz`, in closed form for both variants.
    pub fn integral(&self, x: f64) -> f64 {
        match self {
            GrowthLaw::Hyperbolic { g0, z0 } => g0 * z0 * (x / z0).ln_1p(),
            GrowthLaw::Tabulated { density, rate, .. } => {
                let mut acc = 0.0;
                for i in 0..density.len() - 1 {
                    let (z_l, z_r) = (density[i], density[i + 1]);
                    if x <= z_l {
                        return acc;
                    }
                    let hi = x.min(z_r);
                    let g_hi = rate[i] + (rate[i + 1] - rate[i]) * (hi - z_l) / (z_r - z_l);
                    acc += 0.5 * (rate[i] + g_hi) * (hi - z_l);
                    if x <= z_r {
                        return acc;
                    }
                }
                acc + rate[rate.len() - 1] * (x - density[density.len() - 1])
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GrowthLaw::Hyperbolic { g0, z0 } => {
                if !(*g0 > 0.0 && g0.is_finite() && *z0 > 0.0 && z0.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "hyperbolic growth needs g0 > 0 and z0 > 0, got g0={g0}, z0={z0}"
                    )));
                }
            }
            GrowthLaw::Tabulated {
                density,
                rate,
                tail_epsilon,
            } => {
                validate_table("growth", density, rate)?;
                if density[0] != 0.0 {
                    return Err(Error::InvalidParams(
                        "tabulated growth must start at density 0".into(),
                    ));
                }
                if rate.iter().any(|&g| !(g > 0.0)) {
                    return Err(Error::InvalidParams(
                        "tabulated growth rates must be positive".into(),
                    ));
                }
                if rate.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::InvalidParams(
                        "tabulated growth must be nonincreasing".into(),
                    ));
                }
                if !(rate[rate.len() - 1] < *tail_epsilon) {
                    return Err(Error::InvalidParams(format!(
                        "tabulated growth must end below {tail_epsilon}, last rate is {}",
                        rate[rate.len() - 1]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Fertility as a function of size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BirthLaw {
    /// `β(x) = beta0 · x`.
    Linear { beta0: f64 },
    /// `β(x) = rate`, independent of size.
    Constant { rate: f64 },
    /// Piecewise-linear nondecreasing samples, held constant outside the table.
    Tabulated { size: Vec<f64>, rate: Vec<f64> },
}

impl BirthLaw {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            BirthLaw::Linear { beta0 } => beta0 * x,
            BirthLaw::Constant { rate } => *rate,
            BirthLaw::Tabulated { size, rate } => interpolate(size, rate, x),
        }
    }

    pub fn linear_coefficient(&self) -> Option<f64> {
        match self {
            BirthLaw::Linear { beta0 } => Some(*beta0),
            _ => None,
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            BirthLaw::Linear { beta0 } => *beta0 == 0.0,
            BirthLaw::Constant { rate } => *rate == 0.0,
            BirthLaw::Tabulated { rate, .. } => rate.iter().all(|&r| r == 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BirthLaw::Linear { beta0 } => {
                if !(*beta0 >= 0.0 && beta0.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "beta0 must be >= 0, got {beta0}"
                    )));
                }
            }
            BirthLaw::Constant { rate } => {
                if !(*rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidParams(format!(
                        "constant birth rate must be >= 0, got {rate}"
                    )));
                }
            }
            BirthLaw::Tabulated { size, rate } => {
                validate_table("birth", size, rate)?;
                if rate.iter().any(|&r| !(r >= 0.0)) {
                    return Err(Error::InvalidParams(
                        "tabulated birth rates must be >= 0".into(),
                    ));
                }
                if rate.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidParams(
                        "tabulated birth law must be nondecreasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn validate_table(name: &str, xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(Error::InvalidParams(format!(
            "{name} table needs at least two points and matching lengths"
        )));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "{name} table abscissae must be finite and strictly increasing"
        )));
    }
    Ok(())
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// All model ingredients: mortality, fertility, growth, habitat area and birth size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub mu: f64,
    pub birth: BirthLaw,
    pub growth: GrowthLaw,
    pub area: f64,
    #[serde(default)]
    pub x_m: f64,
}

impl ModelParams {
    /// Linear fertility, hyperbolic growth and `x_m = 0`.
    pub fn hyperbolic_linear(mu: f64, g0: f64, z0: f64, beta0: f64, area: f64) -> Self {
        Self {
            mu,
            birth: BirthLaw::Linear { beta0 },
            growth: GrowthLaw::hyperbolic(g0, z0),
            area,
            x_m: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "mu must be > 0, got {}",
                self.mu
            )));
        }
        if !(self.area > 0.0 && self.area.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "area must be > 0, got {}",
                self.area
            )));
        }
        if !(self.x_m >= 0.0 && self.x_m.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "x_m must be >= 0, got {}",
                self.x_m
            )));
        }
        self.birth.validate()?;
        self.growth.validate()
    }

    pub fn with_area(&self, area: f64) -> Self {
        Self {
            area,
            ..self.clone()
        }
    }

    pub fn with_beta0(&self, beta0: f64) -> Self {
        Self {
            birth: BirthLaw::Linear { beta0 },
            ..self.clone()
        }
    }

    pub fn beta(&self, x: f64) -> f64 {
        self.birth.eval(x)
    }

    pub fn g(&self, z: f64) -> f64 {
        self.growth.eval(z)
    }

    pub fn g0(&self) -> f64 {
        self.growth.g0()
    }

    /// Growth rate of an individual with `m` larger individuals present.
    pub fn g_rank(&self, m: usize) -> f64 {
        self.growth.eval(m as f64 / self.area)
    }

    pub fn beta0(&self) -> Result<f64> {
        self.birth.linear_coefficient().ok_or_else(|| {
            Error::InvalidParams(
                "this computation requires a linear birth law beta(x) = beta0 x".into(),
            )
        })
    }

    /// `R0 = ∫_0^∞ β(x_m + g(0) a) e^{-μ a} da`; exact for linear and constant fertility.
    pub fn r0(&self) -> Result<f64> {
        let (mu, g0) = (self.mu, self.g0());
        match &self.birth {
            BirthLaw::Linear { beta0 } => Ok(beta0 * (self.x_m / mu + g0 / (mu * mu))),
            BirthLaw::Constant { rate } => Ok(rate / mu),
            BirthLaw::Tabulated { .. } => integrate_to_infinity(
                |a| self.beta(self.x_m + g0 * a) * (-mu * a).exp(),
                0.0,
                &QuadTolerance::new(1e-14, 1e-12),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperbolic_values_and_integral() {
        let g = GrowthLaw::hyperbolic(10.0, 1.0);
        assert_eq!(g.eval(0.0), 10.0);
        assert_eq!(g.eval(1.0), 5.0);
        assert!((g.integral(30.0) - 10.0 * 31f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn tabulated_growth_integral_is_exact() {
        let g = GrowthLaw::Tabulated {
            density: vec![0.0, 1.0, 3.0],
            rate: vec![4.0, 2.0, 1e-4],
            tail_epsilon: 1e-3,
        };
        g.validate().unwrap();
        assert!((g.integral(1.0) - 3.0).abs() < 1e-14);
        assert!((g.integral(2.0) - (3.0 + 0.5 * (2.0 + 1.00005))).abs() < 1e-12);
        assert!((g.integral(5.0) - (3.0 + (2.0 + 1e-4) + 2.0 * 1e-4)).abs() < 1e-12);
        assert_eq!(g.eval(100.0), 1e-4);
    }

    #[test]
    fn invalid_laws_are_rejected() {
        assert!(GrowthLaw::hyperbolic(-1.0, 1.0).validate().is_err());
        let rising = GrowthLaw::Tabulated {
            density: vec![0.0, 1.0],
            rate: vec![1.0, 2.0],
            tail_epsilon: 10.0,
        };
        assert!(rising.validate().is_err());
        let no_tail = GrowthLaw::Tabulated {
            density: vec![0.0, 1.0],
            rate: vec![2.0, 1.0],
            tail_epsilon: 1e-3,
        };
        assert!(no_tail.validate().is_err());
        let falling_birth = BirthLaw::Tabulated {
            size: vec![0.0, 1.0],
            rate: vec![1.0, 0.5],
        };
        assert!(falling_birth.validate().is_err());
        let mut p = ModelParams::hyperbolic_linear(1.0, 10.0, 1.0, 3.0, 1.0);
        p.mu = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn r0_closed_forms() {
        let p = ModelParams::hyperbolic_linear(1.0, 10.0, 1.0, 3.0, 1.0);
        assert_eq!(p.r0().unwrap(), 30.0);
        let zero = p.with_beta0(0.0);
        assert_eq!(zero.r0().unwrap(), 0.0);
    }

    #[test]
    fn r0_tabulated_matches_riemann_sum() {
        let p = ModelParams {
            mu: 1.3,
            birth: BirthLaw::Tabulated {
                size: vec![0.0, 2.0, 5.0, 12.0],
                rate: vec![0.0, 0.5, 0.6, 2.0],
            },
            growth: GrowthLaw::hyperbolic(3.0, 1.0),
            area: 1.0,
            x_m: 0.5,
        };
        p.validate().unwrap();
        // midpoint Riemann sum oracle on [0, 40]
        let n = 4_000_000;
        let h = 40.0 / n as f64;
        let oracle: f64 = (0..n)
            .map(|i| {
                let a = (i as f64 + 0.5) * h;
                p.beta(0.5 + 3.0 * a) * (-1.3 * a).exp() * h
            })
            .sum();
        let r0 = p.r0().unwrap();
        assert!((r0 - oracle).abs() < 1e-8 * oracle, "{r0} vs {oracle}");
    }

    #[test]
    fn params_roundtrip_through_json() {
        let p = ModelParams::hyperbolic_linear(1.0, 10.0, 0.2, 2.98967, 0.81);
        let s = serde_json::to_string(&p).unwrap();
        let back: ModelParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        let bad = r#"{"mu":1,"birth":{"kind":"linear","beta0":1},"growth":{"kind":"hyperbolic","g0":1,"z0":1},"area":1,"bogus":2}"#;
        assert!(serde_json::from_str::<ModelParams>(bad).is_err());
    }
}
