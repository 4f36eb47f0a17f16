//! Exact event-driven simulation of the individual-based process.
//!
//! The state is the vector of sizes in increasing order, so index 0 is the
//! smallest (youngest) individual. Between events every individual grows at
//! the constant rate `g(#larger / A)`, so the state is piecewise linear in
//! time and the next birth time can be sampled exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::det;
use crate::error::{domain, Error, Result};
use crate::model::{BirthLaw, ModelParams};

/// Snapshot of the population: a time and the sizes in nondecreasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub time: f64,
    pub sizes: Vec<f64>,
}

impl PopulationState {
    pub fn new(time: f64, sizes: Vec<f64>) -> Result<Self> {
        if sizes.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(domain("sizes must be sorted in increasing order"));
        }
        Ok(Self { time, sizes })
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn total_size(&self) -> f64 {
        self.sizes.iter().sum()
    }

    fn advance_in_place(&mut self, dt: f64, params: &ModelParams) {
        let n = self.sizes.len();
        for (idx, s) in self.sizes.iter_mut().enumerate() {
            *s += dt * params.g_rank(n - 1 - idx);
        }
        self.time += dt;
    }

    /// Moves to `t` with no event in between. The step is `t - time`, so
    /// replaying a log reproduces the simulated sizes bit for bit.
    fn advance_to(&mut self, t: f64, params: &ModelParams) {
        let dt = t - self.time;
        self.advance_in_place(dt, params);
        self.time = t;
    }
}

/// `B = Σ_i β(s_i)`.
pub fn birth_rate(state: &PopulationState, params: &ModelParams) -> f64 {
    state.sizes.iter().map(|&s| params.beta(s)).sum()
}

/// Grows every individual for `dt` at its rank-dependent rate.
pub fn advance(state: &PopulationState, dt: f64, params: &ModelParams) -> Result<PopulationState> {
    if !(dt >= 0.0) {
        return Err(domain(format!("time step must be >= 0, got {dt}")));
    }
    let mut next = state.clone();
    next.advance_in_place(dt, params);
    Ok(next)
}

fn exp1<R: Rng>(rng: &mut R) -> f64 {
    -(1.0 - rng.gen::<f64>()).ln()
}

/// Time to the next death, Exp(nμ) by inverse transform.
pub fn sample_death_time<R: Rng>(n: usize, mu: f64, rng: &mut R) -> Result<f64> {
    if n == 0 {
        return Err(domain("an extinct population has no death clock"));
    }
    Ok(exp1(rng) / (n as f64 * mu))
}

const THINNING_CAP: usize = 1_000_000;
const THINNING_MAX_HALVINGS: u32 = 60;

/// Time to the next birth if it falls before `horizon`, otherwise `None`.
///
/// Linear fertility inverts the quadratic integrated hazard exactly. Other
/// fertility laws are sampled by thinning against `Σ β(s_i + t_r g_i)`, the
/// hazard at the right end of each subinterval, which bounds it because sizes
/// grow and β is nondecreasing.
pub fn sample_birth_time<R: Rng>(
    state: &PopulationState,
    params: &ModelParams,
    rng: &mut R,
    horizon: f64,
) -> Result<Option<f64>> {
    let n = state.len();
    if n == 0 {
        return Err(domain("an extinct population has no birth clock"));
    }
    match params.birth {
        BirthLaw::Linear { beta0 } => {
            if beta0 == 0.0 {
                return Ok(None);
            }
            let s = state.total_size();
            let g: f64 = (0..n).map(|m| params.g_rank(m)).sum();
            // β0 S τ + β0 G τ²/2 = E, in the cancellation-free form
            let e = exp1(rng) / beta0;
            let tau = 2.0 * e / (s + (s * s + 2.0 * g * e).sqrt());
            Ok((tau < horizon).then_some(tau))
        }
        BirthLaw::Constant { rate } => {
            if rate == 0.0 {
                return Ok(None);
            }
            let tau = exp1(rng) / (n as f64 * rate);
            Ok((tau < horizon).then_some(tau))
        }
        BirthLaw::Tabulated { .. } => sample_birth_time_thinning(state, params, rng, horizon),
    }
}

/// Thinning sampler, valid for any nondecreasing fertility law.
pub fn sample_birth_time_thinning<R: Rng>(
    state: &PopulationState,
    params: &ModelParams,
    rng: &mut R,
    horizon: f64,
) -> Result<Option<f64>> {
    let n = state.len();
    if n == 0 {
        return Err(domain("an extinct population has no birth clock"));
    }
    if !(horizon > 0.0) {
        return Ok(None);
    }
    let speeds: Vec<f64> = (0..n).map(|idx| params.g_rank(n - 1 - idx)).collect();
    let hazard = |t: f64| -> f64 {
        state
            .sizes
            .iter()
            .zip(&speeds)
            .map(|(&s, &v)| params.beta(s + t * v))
            .sum()
    };
    let mut left = 0.0;
    let mut iterations = 0;
    while left < horizon {
        let mut width = horizon - left;
        let mut bound = hazard(left + width);
        let mut halvings = 0;
        while bound * width > 4.0 && halvings < THINNING_MAX_HALVINGS {
            width *= 0.5;
            bound = hazard(left + width);
            halvings += 1;
        }
        let right = if width == horizon - left {
            horizon
        } else {
            left + width
        };
        if bound > 0.0 {
            let mut t = left;
            loop {
                iterations += 1;
                if iterations > THINNING_CAP {
                    return Err(Error::NoConvergence {
                        what: "thinning birth sampler",
                        iterations: THINNING_CAP,
                    });
                }
                t += exp1(rng) / bound;
                if t >= right {
                    break;
                }
                if rng.gen::<f64>() * bound < hazard(t) {
                    return Ok(Some(t));
                }
            }
        }
        left = right;
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Birth,
    /// Death of the individual at this 1-based rank, counted from the smallest.
    Death {
        removed_rank: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub n_after: usize,
}

/// Draws the next event if it happens within `remaining`, and applies it.
fn step_within<R: Rng>(
    state: &mut PopulationState,
    params: &ModelParams,
    rng: &mut R,
    remaining: f64,
) -> Result<Option<EventRecord>> {
    let n = state.len();
    let td = sample_death_time(n, params.mu, rng)?;
    let horizon = td.min(remaining);
    let kind = match sample_birth_time(state, params, rng, horizon)? {
        Some(tb) => {
            let t = state.time + tb;
            state.advance_to(t, params);
            state.sizes.insert(0, params.x_m);
            EventKind::Birth
        }
        None if td <= remaining => {
            let t = state.time + td;
            state.advance_to(t, params);
            let idx = rng.gen_range(0..n);
            state.sizes.remove(idx);
            EventKind::Death {
                removed_rank: idx + 1,
            }
        }
        None => return Ok(None),
    };
    Ok(Some(EventRecord {
        time: state.time,
        kind,
        n_after: state.len(),
    }))
}

/// One event of the process: competing death and birth clocks, then either
/// a newborn at size `x_m` or the removal of a uniformly chosen individual.
pub fn step<R: Rng>(
    state: &PopulationState,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(EventRecord, PopulationState)> {
    let mut next = state.clone();
    let event = step_within(&mut next, params, rng, f64::INFINITY)?
        .ok_or_else(|| domain("no event drawn on an unbounded horizon"))?;
    Ok((event, next))
}

/// How the population at time 0 is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// `n0` newborns at size `x_m`, ranked by index.
    FixedCount { n0: usize },
    /// `n0` ages drawn from Exp(μ) and mapped through the deterministic
    /// stationary size-at-age profile.
    FromDetDensity { n0: usize },
    /// Individuals born at the given times `≤ 0`, run forward to time 0 with
    /// Exp(μ) deaths and no other births.
    BirthHistory { times: Vec<f64> },
    /// Like `BirthHistory`, with births from a Poisson process of the given
    /// whole-area rate on `[-span, 0]`.
    PoissonHistory { rate: f64, span: f64 },
}

/// Initial state and the birth time of each individual in it.
fn initialize<R: Rng>(
    init: &InitSpec,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(PopulationState, Vec<f64>)> {
    match init {
        InitSpec::FixedCount { n0 } => Ok((
            PopulationState::new(0.0, vec![params.x_m; *n0])?,
            vec![0.0; *n0],
        )),
        InitSpec::FromDetDensity { n0 } => {
            let sol = det::solve_bbar_with(params, 3)?;
            let mut ages: Vec<f64> = (0..*n0).map(|_| exp1(rng) / params.mu).collect();
            ages.sort_by(f64::total_cmp);
            if ages.windows(2).any(|w| w[0] == w[1]) {
                return Err(domain("tied ages drawn for the initial population"));
            }
            let sizes = ages
                .iter()
                .map(|&a| det::size_at_age_det(a, sol.bbar, params))
                .collect::<Result<Vec<_>>>()?;
            Ok((
                PopulationState::new(0.0, sizes)?,
                ages.iter().map(|a| -a).collect(),
            ))
        }
        InitSpec::BirthHistory { times } => replay_history(times.clone(), params, rng),
        InitSpec::PoissonHistory { rate, span } => {
            if !(*rate >= 0.0 && *span >= 0.0) {
                return Err(domain("history rate and span must be >= 0"));
            }
            let mut times = Vec::new();
            let mut t = -span;
            if *rate > 0.0 {
                loop {
                    t += exp1(rng) / rate;
                    if t > 0.0 {
                        break;
                    }
                    times.push(t);
                }
            }
            replay_history(times, params, rng)
        }
    }
}

fn replay_history<R: Rng>(
    mut times: Vec<f64>,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(PopulationState, Vec<f64>)> {
    if times.iter().any(|&t| !(t <= 0.0)) {
        return Err(domain("history birth times must be <= 0"));
    }
    times.sort_by(f64::total_cmp);
    let Some(&first) = times.first() else {
        return Ok((PopulationState::new(0.0, Vec::new())?, Vec::new()));
    };
    let mut state = PopulationState::new(first, Vec::new())?;
    let mut born = Vec::new();
    let mut next = 0;
    loop {
        let scheduled = times.get(next).copied().unwrap_or(0.0);
        let death = if state.is_empty() {
            f64::INFINITY
        } else {
            state.time + sample_death_time(state.len(), params.mu, rng)?
        };
        if death < scheduled {
            state.advance_to(death, params);
            let idx = rng.gen_range(0..state.len());
            state.sizes.remove(idx);
            born.remove(idx);
            continue;
        }
        state.advance_to(scheduled, params);
        if next == times.len() {
            break;
        }
        state.sizes.insert(0, params.x_m);
        born.insert(0, scheduled);
        next += 1;
    }
    state.time = 0.0;
    Ok((state, born))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub n: usize,
    pub total_size: f64,
    pub birth_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<f64>>,
}

impl Snapshot {
    fn of(state: &PopulationState, time: f64, params: &ModelParams, keep_sizes: bool) -> Self {
        Self {
            time,
            n: state.len(),
            total_size: state.total_size(),
            birth_rate: birth_rate(state, params),
            sizes: keep_sizes.then(|| state.sizes.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimOptions {
    pub t_end: f64,
    pub snapshot_dt: f64,
    /// Store the full size vector in every snapshot.
    pub record_sizes: bool,
    /// Store the event log (needed for age reconstruction).
    pub record_events: bool,
    pub event_cap: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            t_end: 30.0,
            snapshot_dt: 0.1,
            record_sizes: false,
            record_events: true,
            event_cap: 50_000_000,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if !(self.snapshot_dt > 0.0) {
            return Err(Error::InvalidParams(format!(
                "snapshot_dt must be > 0, got {}",
                self.snapshot_dt
            )));
        }
        Ok(())
    }

    /// Snapshot times `k · snapshot_dt ≤ t_end`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let count = (self.t_end / self.snapshot_dt * (1.0 + 1e-12)).floor() as usize;
        (0..=count).map(|k| k as f64 * self.snapshot_dt).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: ModelParams,
    pub seed: u64,
    pub stream: u64,
    pub init: InitSpec,
    pub options: SimOptions,
    pub initial: PopulationState,
    /// Birth time of each individual in `initial`, in the same order.
    pub initial_birth_times: Vec<f64>,
    pub events: Vec<EventRecord>,
    pub snapshots: Vec<Snapshot>,
    pub extinct_at: Option<f64>,
}

/// The RNG of trajectory `stream` in an ensemble seeded with `seed`.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs one trajectory until extinction or `t_end`. Extinct trajectories
/// keep producing empty snapshots up to `t_end` so that all trajectories
/// share the same snapshot grid.
pub fn simulate(
    params: &ModelParams,
    init: &InitSpec,
    options: &SimOptions,
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    params.validate()?;
    options.validate()?;
    let mut rng = trajectory_rng(seed, stream);
    let (mut state, initial_birth_times) = initialize(init, params, &mut rng)?;
    let initial = state.clone();
    let grid = options.snapshot_times();
    let mut snapshots = Vec::with_capacity(grid.len());
    let mut next_snap = 0;
    let mut events = Vec::new();
    let mut n_events = 0usize;
    let mut extinct_at = if state.is_empty() { Some(0.0) } else { None };

    while extinct_at.is_none() {
        if n_events >= options.event_cap {
            return Err(Error::EventCapExceeded {
                cap: options.event_cap,
                time: state.time,
            });
        }
        let before = state.clone();
        let event = step_within(&mut state, params, &mut rng, options.t_end - before.time)?;
        let until = event.map_or(options.t_end, |e| e.time);
        while next_snap < grid.len() && grid[next_snap] <= until {
            let mut copy = before.clone();
            copy.advance_to(grid[next_snap], params);
            snapshots.push(Snapshot::of(
                &copy,
                grid[next_snap],
                params,
                options.record_sizes,
            ));
            next_snap += 1;
        }
        let Some(event) = event else { break };
        n_events += 1;
        if options.record_events {
            events.push(event);
        }
        if event.n_after == 0 {
            extinct_at = Some(event.time);
        }
    }
    let empty = PopulationState::new(0.0, Vec::new())?;
    for &t in &grid[next_snap..] {
        snapshots.push(Snapshot::of(&empty, t, params, options.record_sizes));
    }
    Ok(Trajectory {
        params: params.clone(),
        seed,
        stream,
        init: init.clone(),
        options: options.clone(),
        initial,
        initial_birth_times,
        events,
        snapshots,
        extinct_at,
    })
}

impl Trajectory {
    /// Replays the event log, calling `visit(state, birth_times)` at each of
    /// the requested increasing times. Sizes match the original run exactly.
    pub fn replay<F>(&self, times: &[f64], mut visit: F) -> Result<()>
    where
        F: FnMut(&PopulationState, &[f64]),
    {
        if !self.options.record_events {
            return Err(domain("trajectory was simulated without an event log"));
        }
        let params = &self.params;
        let mut state = self.initial.clone();
        let mut born = self.initial_birth_times.clone();
        let mut events = self.events.iter().peekable();
        for &t in times {
            while let Some(e) = events.next_if(|e| e.time < t) {
                state.advance_to(e.time, params);
                match e.kind {
                    EventKind::Birth => {
                        state.sizes.insert(0, params.x_m);
                        born.insert(0, e.time);
                    }
                    EventKind::Death { removed_rank } => {
                        state.sizes.remove(removed_rank - 1);
                        born.remove(removed_rank - 1);
                    }
                }
            }
            let mut copy = state.clone();
            if !copy.is_empty() {
                copy.advance_to(t, params);
            } else {
                copy.time = t;
            }
            visit(&copy, &born);
        }
        Ok(())
    }
}
