//! Identity suite: the mixture identities for lapses and death-time
//! densities, the exact truncation identities, incomplete-gamma recurrences
//! and the round trip of `F^{-1}`.

use serde::Serialize;

use crate::error::Result;
use crate::experiments::riemann_identity_check;
use crate::qsd::{identity_apsum_pkl, mixture_density_identity, QsdConfig};
use crate::specfun::{f_func, f_inverse, ln_gamma, lower_inc_gamma, upper_inc_gamma};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub check: &'static str,
    pub case: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Absolute or relative error, as the check defines it.
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl VerifyRow {
    fn new(
        check: &'static str,
        case: String,
        lhs: f64,
        rhs: f64,
        error: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            check,
            case,
            lhs,
            rhs,
            error,
            tolerance,
            pass: error < tolerance,
        }
    }
}

pub const APSUM_TOL: f64 = 1e-7;
pub const MIXTURE_TOL: f64 = 1e-8;
pub const EXACT_REL_TOL: f64 = 1e-10;

const M_GRID: [usize; 4] = [0, 1, 3, 6];
const T_GRID: [f64; 4] = [0.1, 0.5, 1.0, 2.0];
const X_GRID: [f64; 4] = [0.5, 2.0, 5.0, 10.0];
const S_GRID: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];
const GAMMA_X_GRID: [f64; 6] = [0.0, 0.1, 1.0, 5.0, 20.0, 100.0];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn apsum_rows(cfg: &QsdConfig) -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    for m in M_GRID {
        for tau in T_GRID {
            for x in X_GRID {
                let c = identity_apsum_pkl(m, tau, x, 1.0, cfg)?;
                rows.push(VerifyRow::new(
                    "apsum_pkl",
                    format!("m={m} tau={tau} B/mu={x}"),
                    c.lhs,
                    c.rhs,
                    c.abs_err,
                    APSUM_TOL,
                ));
            }
        }
    }
    Ok(rows)
}

pub fn mixture_rows(cfg: &QsdConfig) -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    for m in M_GRID {
        for y in T_GRID {
            for x in X_GRID {
                let c = mixture_density_identity(m, y, x, 1.0, cfg)?;
                rows.push(VerifyRow::new(
                    "mixture_density",
                    format!("m={m} y={y} B/mu={x}"),
                    c.lhs,
                    c.rhs,
                    c.abs_err,
                    MIXTURE_TOL,
                ));
            }
        }
    }
    Ok(rows)
}

pub fn riemann_rows() -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    for k in 1..=50 {
        let c = riemann_identity_check(k)?;
        rows.push(VerifyRow::new(
            "riemann_lower",
            format!("k={k}"),
            c.lhs1,
            c.rhs1,
            rel(c.lhs1, c.rhs1),
            EXACT_REL_TOL,
        ));
        rows.push(VerifyRow::new(
            "riemann_upper",
            format!("k={k}"),
            c.lhs2,
            c.rhs2,
            rel(c.lhs2, c.rhs2),
            EXACT_REL_TOL,
        ));
    }
    Ok(rows)
}

pub fn gamma_rows() -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    for s in S_GRID {
        let full = ln_gamma(s).exp();
        for x in GAMMA_X_GRID {
            let lower = lower_inc_gamma(s, x)?;
            let upper = upper_inc_gamma(s, x)?;
            rows.push(VerifyRow::new(
                "gamma_complement",
                format!("s={s} x={x}"),
                lower + upper,
                full,
                (lower + upper - full).abs() / full,
                EXACT_REL_TOL,
            ));
            let next = upper_inc_gamma(s + 1.0, x)?;
            let rec = s * upper + x.powf(s) * (-x).exp();
            rows.push(VerifyRow::new(
                "gamma_recurrence",
                format!("s={s} x={x}"),
                next,
                rec,
                rel(next, rec),
                EXACT_REL_TOL,
            ));
        }
    }
    Ok(rows)
}

pub fn f_inverse_rows() -> Result<Vec<VerifyRow>> {
    let mut rows = Vec::new();
    for y in [1e-8, 1e-3, 0.1, 0.8515045, 1.0, 3.7, 10.0, 50.0] {
        let back = f_func(f_inverse(y)?)?;
        rows.push(VerifyRow::new(
            "f_inverse",
            format!("y={y}"),
            back,
            y,
            rel(back, y),
            EXACT_REL_TOL,
        ));
    }
    Ok(rows)
}

/// Every identity check with the default tolerances.
pub fn identity_suite(cfg: &QsdConfig) -> Result<Vec<VerifyRow>> {
    let mut rows = apsum_rows(cfg)?;
    rows.extend(mixture_rows(cfg)?);
    rows.extend(riemann_rows()?);
    rows.extend(gamma_rows()?);
    rows.extend(f_inverse_rows()?);
    Ok(rows)
}
