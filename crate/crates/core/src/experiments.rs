//! Ensembles of trajectories, conditioned statistics, area sweeps and the
//! numerical identity checks behind the large-area limit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::det;
use crate::error::{domain, Error, Result};
use crate::model::ModelParams;
use crate::numerics::{integrate, QuadTolerance};
use crate::qsd::{self, QsdConfig};
use crate::sim::{simulate, InitSpec, SimOptions, Snapshot, Trajectory};
use crate::specfun::{ln_factorial, regularized_gamma_p, regularized_gamma_q};
use crate::stats::{mean_and_stderr, Histogram};

pub const DEFAULT_TRAJECTORIES: usize = 256;

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot build thread pool: {e}")))
}

/// Simulates trajectories `stream_offset + i` for `i < n_traj` on `threads`
/// workers and maps each through `f`. Results come back in index order, so
/// the output does not depend on the thread count.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_map<T, F>(
    params: &ModelParams,
    init: &InitSpec,
    options: &SimOptions,
    n_traj: usize,
    seed: u64,
    stream_offset: u64,
    threads: usize,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Trajectory) -> Result<T> + Sync,
{
    pool(threads)?.install(|| {
        (0..n_traj)
            .into_par_iter()
            .map(|i| {
                f(simulate(
                    params,
                    init,
                    options,
                    seed,
                    stream_offset + i as u64,
                )?)
            })
            .collect()
    })
}

pub fn run_ensemble(
    params: &ModelParams,
    init: &InitSpec,
    options: &SimOptions,
    n_traj: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<Trajectory>> {
    ensemble_map(params, init, options, n_traj, seed, 0, threads, Ok)
}

/// Means over the trajectories that are non-extinct at each grid time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedSeries {
    pub times: Vec<f64>,
    pub mean_birth_rate: Vec<Option<f64>>,
    pub mean_population: Vec<Option<f64>>,
    pub surviving_count: Vec<usize>,
    pub n_trajectories: usize,
}

impl ConditionedSeries {
    pub fn from_snapshots(runs: &[Vec<Snapshot>]) -> Result<Self> {
        let first = runs.first().ok_or_else(|| domain("no trajectories"))?;
        let times: Vec<f64> = first.iter().map(|s| s.time).collect();
        let len = times.len();
        let mut rate = vec![0.0; len];
        let mut pop = vec![0.0; len];
        let mut count = vec![0usize; len];
        for run in runs {
            if run.len() != len {
                return Err(domain("trajectories have different snapshot grids"));
            }
            for (i, s) in run.iter().enumerate() {
                if s.n > 0 {
                    rate[i] += s.birth_rate;
                    pop[i] += s.n as f64;
                    count[i] += 1;
                }
            }
        }
        let mean = |sum: &[f64]| -> Vec<Option<f64>> {
            sum.iter()
                .zip(&count)
                .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
                .collect()
        };
        Ok(Self {
            mean_birth_rate: mean(&rate),
            mean_population: mean(&pop),
            times,
            surviving_count: count,
            n_trajectories: runs.len(),
        })
    }
}

/// Birth rate and population averaged over survivors at each snapshot time.
pub fn ensemble_conditioned_mean(
    params: &ModelParams,
    init: &InitSpec,
    options: &SimOptions,
    n_traj: usize,
    seed: u64,
    threads: usize,
) -> Result<ConditionedSeries> {
    if n_traj == 0 {
        return Err(domain("need at least one trajectory"));
    }
    let runs = ensemble_map(params, init, options, n_traj, seed, 0, threads, |t| {
        Ok(t.snapshots)
    })?;
    let series = ConditionedSeries::from_snapshots(&runs)?;
    if series.surviving_count.last().copied().unwrap_or(0) == 0 {
        return Err(Error::AllExtinct { n_traj });
    }
    Ok(series)
}

/// Settings of a quasi-stationary birth-rate estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSpec {
    pub burn_in: f64,
    pub window: f64,
    pub n_traj: usize,
    pub snapshot_dt: f64,
    pub seed: u64,
}

impl EstimateSpec {
    /// Burn-in of five mean lifetimes, window up to `t_end`.
    pub fn new(mu: f64, t_end: f64, n_traj: usize, seed: u64) -> Self {
        let burn_in = 5.0 / mu;
        Self {
            burn_in,
            window: t_end - burn_in,
            n_traj,
            snapshot_dt: 0.05 / mu,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsdEstimate {
    /// Time average of the conditioned mean birth rate over the window.
    pub estimate: f64,
    /// Standard error from the spread of per-trajectory window means.
    pub stderr: f64,
    /// Trajectories alive somewhere in the window.
    pub n_contributing: usize,
    /// Trajectories alive at the end of the window.
    pub n_surviving: usize,
    pub series: ConditionedSeries,
}

/// Estimate of the quasi-stationary birth rate from the conditioned ensemble
/// mean over `[burn_in, burn_in + window]`.
pub fn estimate_qsd_birth_rate(
    params: &ModelParams,
    init: &InitSpec,
    spec: &EstimateSpec,
    stream_offset: u64,
    threads: usize,
) -> Result<QsdEstimate> {
    if !(spec.window > 0.0) || !(spec.burn_in >= 0.0) {
        return Err(domain("window must be > 0 and burn-in >= 0"));
    }
    let options = SimOptions {
        t_end: spec.burn_in + spec.window,
        snapshot_dt: spec.snapshot_dt,
        record_sizes: false,
        record_events: false,
        ..SimOptions::default()
    };
    let runs = ensemble_map(
        params,
        init,
        &options,
        spec.n_traj,
        spec.seed,
        stream_offset,
        threads,
        |t| Ok(t.snapshots),
    )?;
    let series = ConditionedSeries::from_snapshots(&runs)?;
    let in_window = |t: f64| t >= spec.burn_in - 1e-12;

    let window_means: Vec<f64> = series
        .times
        .iter()
        .zip(&series.mean_birth_rate)
        .filter(|(&t, _)| in_window(t))
        .filter_map(|(_, m)| *m)
        .collect();
    if window_means.is_empty() {
        return Err(Error::AllExtinct {
            n_traj: spec.n_traj,
        });
    }
    let estimate = window_means.iter().sum::<f64>() / window_means.len() as f64;

    let per_traj: Vec<f64> = runs
        .iter()
        .filter_map(|run| {
            let alive: Vec<f64> = run
                .iter()
                .filter(|s| in_window(s.time) && s.n > 0)
                .map(|s| s.birth_rate)
                .collect();
            (!alive.is_empty()).then(|| alive.iter().sum::<f64>() / alive.len() as f64)
        })
        .collect();
    let (_, stderr) = mean_and_stderr(&per_traj)?;
    Ok(QsdEstimate {
        estimate,
        stderr,
        n_contributing: per_traj.len(),
        n_surviving: series.surviving_count.last().copied().unwrap_or(0),
        series,
    })
}

/// Simulation settings for the optional Monte Carlo column of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBudget {
    pub estimate: EstimateSpec,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaSweepRow {
    pub area: f64,
    pub bbar_analytic: f64,
    pub bbar_sim: Option<f64>,
    pub bbar_sim_stderr: Option<f64>,
    pub bbar_det: f64,
    /// `A · b̄`.
    pub bbar_scaled: f64,
    /// `|B̄(A)/A - b̄| / b̄`.
    pub rel_gap_limit: f64,
    /// `|B̄_sim - B̄(A)| / B̄(A)`.
    pub rel_gap_sim: Option<f64>,
}

/// Initial condition for sweep simulations: a Poisson birth history at the
/// deterministic stationary rate, scaled to the area.
pub fn sweep_init(params: &ModelParams) -> Result<InitSpec> {
    let bbar = det::solve_bbar_with(params, 3)?.bbar;
    Ok(InitSpec::PoissonHistory {
        rate: bbar * params.area,
        span: 10.0 / params.mu,
    })
}

/// Analytic `B̄(A)` and deterministic `A b̄` for each area, plus a Monte
/// Carlo estimate when `budget` is given. Area `i` simulates streams
/// starting at `i · 2^32`.
pub fn sweep_area(
    params: &ModelParams,
    areas: &[f64],
    cfg: &QsdConfig,
    budget: Option<&SimBudget>,
) -> Result<Vec<AreaSweepRow>> {
    let bbar_det = det::solve_bbar(params)?.bbar;
    let mut rows = Vec::with_capacity(areas.len());
    for (i, &area) in areas.iter().enumerate() {
        let p = params.with_area(area);
        let analytic = qsd::solve_bbar(&p, cfg)?.bbar;
        let sim = match budget {
            Some(b) => Some(estimate_qsd_birth_rate(
                &p,
                &sweep_init(&p)?,
                &b.estimate,
                (i as u64) << 32,
                b.threads,
            )?),
            None => None,
        };
        rows.push(AreaSweepRow {
            area,
            bbar_analytic: analytic,
            bbar_sim: sim.as_ref().map(|s| s.estimate),
            bbar_sim_stderr: sim.as_ref().map(|s| s.stderr),
            bbar_det,
            bbar_scaled: area * bbar_det,
            rel_gap_limit: (analytic / area - bbar_det).abs() / bbar_det,
            rel_gap_sim: sim
                .as_ref()
                .map(|s| (s.estimate - analytic).abs() / analytic),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct R0GapRow {
    pub r0: f64,
    pub bbar_det: f64,
    pub bbar_qsd: f64,
    /// `(B̄ - A b̄) / (A b̄)`.
    pub rel_gap: f64,
}

/// Relative gap between the quasi-stationary and deterministic birth rates
/// as `β0` varies, for linear fertility.
pub fn relative_gap_vs_r0(
    params: &ModelParams,
    r0_list: &[f64],
    cfg: &QsdConfig,
) -> Result<Vec<R0GapRow>> {
    let unit = params.with_beta0(1.0).r0()?;
    r0_list
        .iter()
        .map(|&r0| {
            let p = params.with_beta0(r0 / unit);
            let bbar_det = det::solve_bbar_with(&p, 3)?.bbar;
            let bbar_qsd = qsd::solve_bbar(
                &p,
                &QsdConfig {
                    table_points: 3,
                    ..cfg.clone()
                },
            )?
            .bbar;
            let scaled = bbar_det * p.area;
            Ok(R0GapRow {
                r0,
                bbar_det,
                bbar_qsd,
                rel_gap: (bbar_qsd - scaled) / scaled,
            })
        })
        .collect()
}

/// `(age, size)` of every individual alive at the times `k · sample_dt`,
/// reconstructed by replaying the event log.
pub fn age_size_scatter(traj: &Trajectory, sample_dt: f64) -> Result<Vec<(f64, f64)>> {
    if !(sample_dt > 0.0) {
        return Err(domain("sample_dt must be > 0"));
    }
    let end = traj.extinct_at.unwrap_or(traj.options.t_end);
    let count = (end / sample_dt).floor() as usize;
    let times: Vec<f64> = (0..=count).map(|k| k as f64 * sample_dt).collect();
    let mut pairs = Vec::new();
    traj.replay(&times, |state, born| {
        for (&s, &b) in state.sizes.iter().zip(born) {
            pairs.push((state.time - b, s));
        }
    })?;
    Ok(pairs)
}

/// Sizes pooled over all snapshots at or after `burn_in`.
pub fn pooled_sizes(traj: &Trajectory, burn_in: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for snap in traj.snapshots.iter().filter(|s| s.time >= burn_in) {
        let sizes = snap
            .sizes
            .as_ref()
            .ok_or_else(|| domain("trajectory was simulated without recorded sizes"))?;
        out.extend_from_slice(sizes);
    }
    Ok(out)
}

/// Normalised histogram of the sizes pooled after `burn_in`.
pub fn size_histogram(traj: &Trajectory, burn_in: f64, bins: usize) -> Result<Histogram> {
    Histogram::new(&pooled_sizes(traj, burn_in)?, bins)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeBin {
    pub age_lo: f64,
    pub age_hi: f64,
    pub count: usize,
    pub mean_size: f64,
    /// Mean of `profile(age)` over the same samples.
    pub mean_profile: f64,
}

/// Sample mean size per age bin on `[0, age_max)`, alongside the mean of a
/// theoretical profile evaluated at the sampled ages.
pub fn binned_age_size<F>(
    pairs: &[(f64, f64)],
    bins: usize,
    age_max: f64,
    mut profile: F,
) -> Result<Vec<AgeBin>>
where
    F: FnMut(f64) -> Result<f64>,
{
    if bins == 0 || !(age_max > 0.0) {
        return Err(domain("need at least one bin and a positive age range"));
    }
    let width = age_max / bins as f64;
    let mut sums = vec![(0usize, 0.0, 0.0); bins];
    for &(a, s) in pairs {
        if !(a >= 0.0 && a < age_max) {
            continue;
        }
        let i = ((a / width) as usize).min(bins - 1);
        sums[i].0 += 1;
        sums[i].1 += s;
        sums[i].2 += profile(a)?;
    }
    Ok(sums
        .iter()
        .enumerate()
        .filter(|(_, s)| s.0 > 0)
        .map(|(i, &(c, s, p))| AgeBin {
            age_lo: i as f64 * width,
            age_hi: (i + 1) as f64 * width,
            count: c,
            mean_size: s / c as f64,
            mean_profile: p / c as f64,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannCheck {
    pub lhs1: f64,
    pub rhs1: f64,
    pub lhs2: f64,
    pub rhs2: f64,
}

/// The two exact truncation identities
/// `(1/k) Σ_{m<k} Γ(m+1,k)/m! = e^{-k} k^{k-1}/(k-1)!` and
/// `(1/k) Σ_{m≥k} γ(m+1,k)/m! = e^{-k} k^k/k!`, both sides in log space.
pub fn riemann_identity_check(k: usize) -> Result<RiemannCheck> {
    if k == 0 {
        return Err(domain("k must be >= 1"));
    }
    let kf = k as f64;
    let mut lhs1 = 0.0;
    for m in 0..k {
        lhs1 += regularized_gamma_q((m + 1) as f64, kf)?;
    }
    lhs1 /= kf;
    let rhs1 = (-kf + (kf - 1.0) * kf.ln() - ln_factorial((k - 1) as u64)).exp();

    let mut lhs2 = 0.0;
    let mut m = k;
    loop {
        let term = regularized_gamma_p((m + 1) as f64, kf)?;
        lhs2 += term;
        // later terms shrink at least geometrically with ratio k/(m+2)
        let ratio = kf / (m + 2) as f64;
        if ratio < 1.0 && term / (1.0 - ratio) < 1e-17 * lhs2 {
            break;
        }
        m += 1;
        if m > k + 100_000 {
            return Err(Error::TruncationFailure { cap: 100_000 });
        }
    }
    lhs2 /= kf;
    let rhs2 = (-kf + kf * kf.ln() - ln_factorial(k as u64)).exp();
    Ok(RiemannCheck {
        lhs1,
        rhs1,
        lhs2,
        rhs2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannProbeRow {
    pub x: f64,
    pub value: f64,
    pub limit: f64,
    pub gap: f64,
}

/// `(1/x) Σ_m G(m/x) γ(m+1, x)/m!` against its limit `∫_0^1 G`.
pub fn riemann_limit_probe<G: Fn(f64) -> f64>(
    g: G,
    x_list: &[f64],
) -> Result<Vec<RiemannProbeRow>> {
    let limit = integrate(&g, 0.0, 1.0, &QuadTolerance::new(1e-12, 1e-10))?;
    x_list
        .iter()
        .map(|&x| {
            if !(x > 0.0) {
                return Err(domain("x must be > 0"));
            }
            let mut sum = 0.0;
            let mut mass = 0.0;
            let mut m = 0usize;
            loop {
                let w = regularized_gamma_p((m + 1) as f64, x)?;
                sum += g(m as f64 / x) * w;
                mass += w;
                let ratio = x / (m + 2) as f64;
                if ratio < 1.0 && w / (1.0 - ratio) < 1e-17 * mass {
                    break;
                }
                m += 1;
                if m > 10_000_000 {
                    return Err(Error::TruncationFailure { cap: 10_000_000 });
                }
            }
            let value = sum / x;
            Ok(RiemannProbeRow {
                x,
                value,
                limit,
                gap: (value - limit).abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(beta0: f64, area: f64) -> ModelParams {
        ModelParams::hyperbolic_linear(1.0, 10.0, 1.0, beta0, area)
    }

    #[test]
    fn riemann_identities() {
        let c = riemann_identity_check(1).unwrap();
        assert!((c.lhs1 - (-1f64).exp()).abs() < 1e-15);
        assert!((c.rhs1 - (-1f64).exp()).abs() < 1e-15);
        for k in [20, 50] {
            let c = riemann_identity_check(k).unwrap();
            assert!((c.lhs1 - c.rhs1).abs() < 1e-10 * c.rhs1, "k={k}");
            assert!((c.lhs2 - c.rhs2).abs() < 1e-10 * c.rhs2, "k={k}");
        }
    }

    #[test]
    fn riemann_probe_examples() {
        let rows = riemann_limit_probe(|_| 1.0, &[100.0]).unwrap();
        assert!(rows[0].gap < 0.05);
        let rows = riemann_limit_probe(|y| y * y, &[10.0, 100.0, 1000.0]).unwrap();
        assert!(rows[0].gap > rows[1].gap && rows[1].gap > rows[2].gap);
        let rows =
            riemann_limit_probe(|y| if y <= 0.5 { 1.0 } else { 0.0 }, &[10.0, 1000.0]).unwrap();
        assert!((rows[1].limit - 0.5).abs() < 1e-9);
        assert!(rows[1].gap < rows[0].gap.max(0.01));
    }

    #[test]
    fn single_trajectory_series_equals_snapshots() {
        let p = params(0.87362, 1.0);
        let opts = SimOptions {
            t_end: 3.0,
            snapshot_dt: 0.5,
            ..SimOptions::default()
        };
        let init = InitSpec::FixedCount { n0: 5 };
        let series = ensemble_conditioned_mean(&p, &init, &opts, 1, 9, 1).unwrap();
        let traj = simulate(&p, &init, &opts, 9, 0).unwrap();
        for (i, s) in traj.snapshots.iter().enumerate() {
            assert_eq!(series.mean_birth_rate[i], Some(s.birth_rate));
            assert_eq!(series.mean_population[i], Some(s.n as f64));
        }
    }

    #[test]
    fn pure_death_is_all_extinct() {
        let p = params(0.0, 1.0);
        let opts = SimOptions {
            t_end: 100.0,
            snapshot_dt: 1.0,
            ..SimOptions::default()
        };
        let r = ensemble_conditioned_mean(&p, &InitSpec::FixedCount { n0: 3 }, &opts, 8, 1, 2);
        assert!(matches!(r, Err(Error::AllExtinct { n_traj: 8 })));
    }

    #[test]
    fn ensemble_independent_of_thread_count() {
        let p = params(3.0, 0.81);
        let opts = SimOptions {
            t_end: 4.0,
            snapshot_dt: 0.25,
            ..SimOptions::default()
        };
        let init = InitSpec::FixedCount { n0: 10 };
        let a = run_ensemble(&p, &init, &opts, 12, 77, 1).unwrap();
        let b = run_ensemble(&p, &init, &opts, 12, 77, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_trend_and_constant_det_rate() {
        let p = params(0.87362, 1.0);
        let rows =
            sweep_area(&p, &[1.0, 10.0, 100.0, 1000.0], &QsdConfig::default(), None).unwrap();
        assert!(rows
            .windows(2)
            .all(|w| w[1].rel_gap_limit < w[0].rel_gap_limit));
        assert!(rows.iter().all(|r| r.bbar_det == rows[0].bbar_det));
    }

    #[test]
    fn gap_decreases_with_r0() {
        let rows = relative_gap_vs_r0(
            &params(1.0, 1.0),
            &[2.0, 5.0, 20.0, 100.0],
            &QsdConfig::default(),
        )
        .unwrap();
        assert!(rows.windows(2).all(|w| w[1].rel_gap < w[0].rel_gap));
        assert!(rows.iter().all(|r| r.rel_gap > 0.0));
    }

    #[test]
    fn lone_individual_scatter_lies_on_line() {
        let p = params(0.0, 1.0);
        let opts = SimOptions {
            t_end: 2.0,
            snapshot_dt: 0.5,
            ..SimOptions::default()
        };
        let traj = simulate(&p, &InitSpec::FixedCount { n0: 1 }, &opts, 3, 0).unwrap();
        for (age, size) in age_size_scatter(&traj, 0.1).unwrap() {
            assert!((size - 10.0 * age).abs() < 1e-12);
        }
    }

    #[test]
    fn scatter_counts_match_snapshots() {
        let p = params(0.87362, 1.0);
        let opts = SimOptions {
            t_end: 6.0,
            snapshot_dt: 0.5,
            ..SimOptions::default()
        };
        let traj = simulate(
            &p,
            &InitSpec::PoissonHistory {
                rate: 30.0,
                span: 5.0,
            },
            &opts,
            4,
            0,
        )
        .unwrap();
        let pairs = age_size_scatter(&traj, 0.5).unwrap();
        let alive: usize = traj
            .snapshots
            .iter()
            .filter(|s| s.time <= traj.extinct_at.unwrap_or(f64::INFINITY))
            .map(|s| s.n)
            .sum();
        assert_eq!(pairs.len(), alive);
    }

    #[test]
    fn histogram_requires_sizes() {
        let p = params(0.87362, 1.0);
        let opts = SimOptions {
            t_end: 3.0,
            snapshot_dt: 0.5,
            record_sizes: true,
            ..SimOptions::default()
        };
        let traj = simulate(&p, &InitSpec::FixedCount { n0: 20 }, &opts, 2, 0).unwrap();
        let h = size_histogram(&traj, 1.0, 10).unwrap();
        assert!((h.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let bare = simulate(
            &p,
            &InitSpec::FixedCount { n0: 20 },
            &SimOptions {
                record_sizes: false,
                ..opts
            },
            2,
            0,
        )
        .unwrap();
        assert!(size_histogram(&bare, 1.0, 10).is_err());
    }
}
