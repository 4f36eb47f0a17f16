//! Adaptive Gauss–Kronrod quadrature, Brent root finding and fixed
//! Gauss–Legendre panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances for adaptive quadrature. Integration stops once the summed
/// error estimate is below `max(abs_tol, rel_tol * |I|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadTolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_subdivisions: 4000,
        }
    }
}

impl QuadTolerance {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

// Kronrod 15-point abscissae; the odd entries are the embedded Gauss 7 nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let k = kronrod * half;
    let g = gauss * half;
    (k, (k - g).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive G7/K15 integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: &QuadTolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "integration limits must be finite: [{a}, {b}]"
        )));
    }
    let (value, err) = gk15(&f, a, b);
    if !value.is_finite() {
        return Err(Error::Domain(format!("non-finite integrand on [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, err });
    let mut total = value;
    let mut total_err = err;
    let mut splits = 0;
    while total_err > tol.abs_tol.max(tol.rel_tol * total.abs()) {
        if splits >= tol.max_subdivisions {
            return Err(Error::NoConvergence {
                what: "adaptive quadrature",
                iterations: splits,
            });
        }
        let seg = heap.pop().expect("heap never empties");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval exhausted at machine resolution; accept what we have
            heap.push(seg);
            break;
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            err: e2,
        });
        splits += 1;
        if splits % 64 == 0 {
            // resum to shed accumulated rounding in the running totals
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.err).sum();
        }
    }
    Ok(heap.iter().map(|s| s.value).sum())
}

/// Integral of `f` over `[a, ∞)` through the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: &QuadTolerance) -> Result<f64> {
    integrate(
        |t: f64| {
            let one_minus = 1.0 - t;
            let x = a + t / one_minus;
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v / (one_minus * one_minus)
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Brent's method on a bracket `[a, b]` with `f(a)` and `f(b)` of opposite sign.
///
/// Stops when the bracket is narrower than `x_tol` (absolute) or an exact zero is hit.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    x_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoRootInBracket {
            lo: a.min(b),
            hi: a.max(b),
        });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * x_tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
    }
    Err(Error::NoConvergence {
        what: "Brent root finder",
        iterations: max_iter,
    })
}

/// A sign-change bracket `[lo, hi]` together with the function values there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

/// Geometric bracketing for a function that is positive near zero and
/// negative far out. Starts at `start` and multiplies or divides by `factor`
/// until the sign flips, staying inside `[min, max]`.
pub fn bracket_decreasing<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    start: f64,
    factor: f64,
    min: f64,
    max: f64,
) -> Result<Bracket> {
    let mut x = start.clamp(min, max);
    let mut fx = f(x)?;
    if fx > 0.0 {
        loop {
            if x >= max {
                return Err(Error::NoRootInBracket { lo: start, hi: max });
            }
            let next = (x * factor).min(max);
            let fn_ = f(next)?;
            if fn_ <= 0.0 {
                return Ok(Bracket {
                    lo: x,
                    hi: next,
                    f_lo: fx,
                    f_hi: fn_,
                });
            }
            x = next;
            fx = fn_;
        }
    } else {
        loop {
            if x <= min {
                return Err(Error::NoRootInBracket { lo: min, hi: start });
            }
            let next = (x / factor).max(min);
            let fn_ = f(next)?;
            if fn_ > 0.0 {
                return Ok(Bracket {
                    lo: next,
                    hi: x,
                    f_lo: fn_,
                    f_hi: fx,
                });
            }
            x = next;
            fx = fn_;
        }
    }
}

/// Gauss–Legendre rule on `[0, 1]` with the matching cumulative integration
/// matrix: `cumulative[i][j] = ∫_0^{node_i} ℓ_j(t) dt` for the Lagrange basis `ℓ_j`.
#[derive(Debug, Clone)]
pub struct GaussPanel {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub cumulative: Vec<Vec<f64>>,
}

impl GaussPanel {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre_unit(n);
        // ∫_0^{x_i} ℓ_j is exact under the same rule mapped onto [0, x_i].
        let cumulative = nodes
            .iter()
            .map(|&xi| {
                (0..n)
                    .map(|j| {
                        nodes
                            .iter()
                            .zip(&weights)
                            .map(|(&t, &w)| w * xi * lagrange(&nodes, j, t * xi))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Self {
            nodes,
            weights,
            cumulative,
        }
    }
}

fn lagrange(nodes: &[f64], j: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != j)
        .map(|(_, &xm)| (x - xm) / (nodes[j] - xm))
        .product()
}

/// Gauss–Legendre nodes and weights mapped onto `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential_integrals() {
        let tol = QuadTolerance::default();
        let v = integrate(|x| x * x * x, 0.0, 2.0, &tol).unwrap();
        assert!((v - 4.0).abs() < 1e-13);
        let v = integrate_to_infinity(|x| (-x).exp(), 0.0, &tol).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = integrate(|x: f64| x.sqrt(), 0.0, 1.0, &tol).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let tol = QuadTolerance::default();
        let v = integrate(|x: f64| x.cos(), 1.0, 0.0, &tol).unwrap();
        assert!((v + 1f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn brent_finds_roots() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-15, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        assert!(matches!(
            brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100),
            Err(Error::NoRootInBracket { .. })
        ));
    }

    #[test]
    fn bracket_expands_both_ways() {
        let b = bracket_decreasing(|x| Ok(100.0 - x), 1.0, 4.0, 1e-6, 1e9).unwrap();
        assert!(b.lo < 100.0 && b.hi >= 100.0);
        let b = bracket_decreasing(|x| Ok(0.01 - x), 1.0, 4.0, 1e-6, 1e9).unwrap();
        assert!(b.lo < 0.01 && b.hi >= 0.01);
    }

    #[test]
    fn gauss_panel_integrates_cubics_cumulatively() {
        let panel = GaussPanel::new(8);
        let w: f64 = panel.weights.iter().sum();
        assert!((w - 1.0).abs() < 1e-14);
        // ∫_0^x 3t^2 dt = x^3
        let vals: Vec<f64> = panel.nodes.iter().map(|&t| 3.0 * t * t).collect();
        for (i, &xi) in panel.nodes.iter().enumerate() {
            let c: f64 = panel.cumulative[i]
                .iter()
                .zip(&vals)
                .map(|(a, b)| a * b)
                .sum();
            assert!((c - xi.powi(3)).abs() < 1e-13, "{c} vs {}", xi.powi(3));
        }
    }
}
