//! Small statistics helpers: Kolmogorov–Smirnov distances, histograms and
//! sample means with standard errors.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// `sup_x |F_n(x) - F(x)|` for sorted samples, evaluating `cdf` at every sample.
pub fn ks_distance<F>(sorted: &[f64], mut cdf: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if sorted.is_empty() {
        return Err(domain("K-S distance of an empty sample"));
    }
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x)?;
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// Upper bound on the K-S distance that evaluates `cdf` at only about
/// `points` order statistics. Between two evaluated samples both the
/// empirical and the model CDF are nondecreasing, which bounds the gap on
/// the whole interval.
pub fn ks_distance_bound<F>(sorted: &[f64], points: usize, mut cdf: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if sorted.is_empty() {
        return Err(domain("K-S distance of an empty sample"));
    }
    let n = sorted.len();
    let points = points.clamp(1, n);
    let nf = n as f64;
    // evaluated ranks, always including the first and last sample
    let mut ranks: Vec<usize> = if points == 1 {
        vec![0, n - 1]
    } else {
        (0..points).map(|j| j * (n - 1) / (points - 1)).collect()
    };
    ranks.dedup();
    let mut prev_f = 0.0;
    let mut prev_ecdf = 0.0;
    let mut d: f64 = 0.0;
    for &r in &ranks {
        let x = sorted[r];
        let f = cdf(x)?;
        let below = sorted.partition_point(|&s| s < x) as f64 / nf;
        let at = sorted.partition_point(|&s| s <= x) as f64 / nf;
        // on [x_prev, x): ecdf in [prev_ecdf, below], model in [prev_f, f]
        d = d.max(below - prev_f).max(f - prev_ecdf);
        d = d.max((at - f).abs());
        prev_f = f;
        prev_ecdf = at;
    }
    d = d.max(1.0 - prev_f);
    Ok(d)
}

/// Histogram normalised to unit total mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Histogram {
    /// Equal-width bins spanning the sample range.
    pub fn new(samples: &[f64], bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(domain("histogram of an empty sample"));
        }
        if bins == 0 {
            return Err(domain("histogram needs at least one bin"));
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0usize; bins];
        for &s in samples {
            let i = (((s - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        let total = samples.len() as f64;
        Ok(Self {
            edges,
            mass: counts.iter().map(|&c| c as f64 / total).collect(),
        })
    }

    /// Mass divided by bin width.
    pub fn density(&self) -> Vec<f64> {
        self.mass
            .iter()
            .zip(self.edges.windows(2))
            .map(|(m, e)| m / (e[1] - e[0]))
            .collect()
    }
}

/// Sample mean and the standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(domain("mean of an empty sample"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, f64::NAN));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
