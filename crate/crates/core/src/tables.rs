//! Age grids and inversion of tabulated increasing profiles.

use crate::error::{domain, Result};
use crate::numerics::brent;

/// Ages below this survival weight are not tabulated.
pub const SURVIVAL_CUTOFF: f64 = 1e-12;

/// `0` followed by `n - 1` log-uniform ages from `1e-4/μ` to `a_max`, where
/// `e^{-μ a_max} = SURVIVAL_CUTOFF`.
pub fn age_grid(mu: f64, n: usize) -> Vec<f64> {
    let n = n.max(3);
    let a_min = 1e-4 / mu;
    let a_max = -SURVIVAL_CUTOFF.ln() / mu;
    let ratio = (a_max / a_min).ln() / (n - 2) as f64;
    std::iter::once(0.0)
        .chain((0..n - 1).map(|i| a_min * (ratio * i as f64).exp()))
        .collect()
}

/// Solves `profile(a) = x` for a strictly increasing `profile`, using the
/// table `(ages, values)` for the initial bracket and doubling past its end.
pub fn invert_increasing<F>(ages: &[f64], values: &[f64], x: f64, mut profile: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if x < values[0] {
        return Err(domain(format!(
            "value {x} lies below the profile start {}",
            values[0]
        )));
    }
    if x == values[0] {
        return Ok(ages[0]);
    }
    let idx = values.partition_point(|&v| v < x);
    let (lo, hi) = if idx < values.len() {
        if values[idx] == x {
            return Ok(ages[idx]);
        }
        (ages[idx - 1], ages[idx])
    } else {
        let mut lo = ages[ages.len() - 1];
        let mut hi = 2.0 * lo.max(1e-12);
        let mut guard = 0;
        while profile(hi)? < x {
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(domain(format!(
                    "value {x} is beyond the reachable profile range"
                )));
            }
        }
        (lo, hi)
    };
    let mut err = None;
    let root = brent(
        |a| match profile(a) {
            Ok(v) => v - x,
            Err(e) => {
                err = Some(e);
                0.0
            }
        },
        lo,
        hi,
        1e-14 * hi.max(1e-300),
        300,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(root),
    }
}
