//! Subcommand implementations. Each writes its artifacts and a manifest into
//! the output directory and returns a one-line summary for stdout.

use std::path::{Path, PathBuf};

use anyhow::Context;
use hierpop::experiments::{
    age_size_scatter, estimate_qsd_birth_rate, size_histogram, sweep_area, sweep_init,
    EstimateSpec, SimBudget,
};
use hierpop::io::{
    write_conditioned_series_csv, write_det_solution_csv, write_events_csv, write_json,
    write_plot_csv, write_qsd_solution_csv, write_snapshots_csv, write_sweep_csv, write_verify_csv,
    PlotPoint,
};
use hierpop::sim::{simulate, InitSpec};
use hierpop::verify::identity_suite;
use hierpop::{det, qsd, Error, ModelParams};
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, SCHEMA_VERSION};

/// Raised by `verify` when some identity misses its tolerance. Exit code 4.
#[derive(Debug)]
pub struct VerifyFailed(pub usize);

impl std::fmt::Display for VerifyFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} identity checks exceeded their tolerance", self.0)
    }
}

impl std::error::Error for VerifyFailed {}

pub struct RunContext<'a> {
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub params: ModelParams,
    pub out: PathBuf,
    pub threads: usize,
    pub closed_form: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    schema_version: u32,
    seed: u64,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    closed_form: bool,
    /// Resolved model, including the fertility slope when a target rate was given.
    resolved_params: &'a ModelParams,
    /// Feeding this back through `--config` reruns the command.
    config: &'a RunConfig,
    files: Vec<&'static str>,
}

impl RunContext<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(&self, mut files: Vec<&'static str>) -> anyhow::Result<()> {
        files.push("manifest.json");
        let manifest = Manifest {
            tool: "hierpop",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            schema_version: SCHEMA_VERSION,
            seed: self.config.seed,
            closed_form: self.closed_form,
            resolved_params: &self.params,
            config: self.config,
            files,
        };
        write_json(&self.path("manifest.json"), &manifest)?;
        Ok(())
    }

    fn init_or_default(&self, init: &Option<InitSpec>) -> anyhow::Result<InitSpec> {
        match init {
            Some(i) => Ok(i.clone()),
            None => {
                Ok(sweep_init(&self.params).context("building the default initial population")?)
            }
        }
    }
}

pub fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn det_solve(ctx: &RunContext) -> anyhow::Result<String> {
    let sol = det::solve_bbar(&ctx.params)?;
    write_det_solution_csv(&ctx.path("det_solution.csv"), &sol)?;
    write_json(
        &ctx.path("det_solution.json"),
        &json!({ "bbar": sol.bbar, "r0": sol.r0, "residual": sol.residual }),
    )?;
    let mut points: Vec<PlotPoint> = sol
        .ages
        .iter()
        .zip(&sol.sizes)
        .map(|(&a, &s)| PlotPoint::new("size_at_age", a, s))
        .collect();
    points.extend(
        sol.sizes
            .iter()
            .zip(&sol.densities)
            .map(|(&x, &d)| PlotPoint::new("size_density", x, d)),
    );
    write_plot_csv(&ctx.path("plot.csv"), &points)?;
    ctx.finish(vec!["det_solution.csv", "det_solution.json", "plot.csv"])?;
    Ok(format!("b̄ = {} (R0 = {})", sol.bbar, sol.r0))
}

pub fn qsd_solve(ctx: &RunContext) -> anyhow::Result<String> {
    let cfg = &ctx.config.numerics;
    let (sol, method) = if ctx.closed_form {
        let bbar = qsd::closed_form_bbar(&ctx.params)?;
        (qsd::solution_at(bbar, &ctx.params, cfg)?, "closed_form")
    } else {
        (qsd::solve_bbar(&ctx.params, cfg)?, "series")
    };
    write_qsd_solution_csv(&ctx.path("qsd_solution.csv"), &sol)?;
    write_json(
        &ctx.path("qsd_solution.json"),
        &json!({
            "method": method,
            "bbar": sol.bbar,
            "area": sol.area,
            "r0": sol.r0,
            "residual": sol.residual,
            "truncation": { "k_max": sol.truncation_k, "tail_bound": sol.tail_bound },
        }),
    )?;
    let mut points: Vec<PlotPoint> = sol
        .ages
        .iter()
        .zip(&sol.sizes)
        .map(|(&a, &s)| PlotPoint::new("mean_size_at_age", a, s))
        .collect();
    points.extend(
        sol.sizes
            .iter()
            .zip(&sol.densities)
            .map(|(&x, &d)| PlotPoint::new("size_density", x, d)),
    );
    write_plot_csv(&ctx.path("plot.csv"), &points)?;
    ctx.finish(vec!["qsd_solution.csv", "qsd_solution.json", "plot.csv"])?;
    Ok(format!("B̄ = {} ({method}, R0 = {})", sol.bbar, sol.r0))
}

pub fn simulate_cmd(ctx: &RunContext) -> anyhow::Result<String> {
    let sc = &ctx.config.experiment.simulate;
    let init = ctx.init_or_default(&sc.init)?;
    let traj = simulate(&ctx.params, &init, &sc.options, ctx.config.seed, sc.stream)?;
    let mut files = vec!["snapshots.csv", "trajectory.json", "plot.csv"];
    write_snapshots_csv(&ctx.path("snapshots.csv"), &traj)?;
    if sc.options.record_events {
        write_events_csv(&ctx.path("events.csv"), &traj)?;
        files.push("events.csv");
    }
    write_json(
        &ctx.path("trajectory.json"),
        &json!({
            "params": traj.params,
            "seed": traj.seed,
            "stream": traj.stream,
            "init": traj.init,
            "t_end": traj.options.t_end,
            "extinct_at": traj.extinct_at,
            "n_initial": traj.initial.len(),
            "n_events": traj.events.len(),
        }),
    )?;

    let mut points = Vec::new();
    for s in &traj.snapshots {
        points.push(PlotPoint::new("population", s.time, s.n as f64));
        points.push(PlotPoint::new("birth_rate", s.time, s.birth_rate));
    }
    if sc.options.record_events {
        for (age, size) in age_size_scatter(&traj, sc.options.snapshot_dt)? {
            points.push(PlotPoint::new("age_size", age, size));
        }
    }
    if sc.options.record_sizes {
        let burn_in = 5.0 / ctx.params.mu;
        match size_histogram(&traj, burn_in, 40) {
            Ok(h) => {
                for (e, d) in h.edges.windows(2).zip(h.density()) {
                    points.push(PlotPoint::new("size_histogram", 0.5 * (e[0] + e[1]), d));
                }
            }
            // nobody alive after burn-in
            Err(Error::Domain(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    write_plot_csv(&ctx.path("plot.csv"), &points)?;
    ctx.finish(files)?;
    Ok(match traj.extinct_at {
        Some(t) => format!("{} events, extinct at t = {t}", traj.events.len()),
        None => format!(
            "{} events, n = {} at t = {}",
            traj.events.len(),
            traj.snapshots.last().map_or(0, |s| s.n),
            traj.options.t_end
        ),
    })
}

fn estimate_spec(ctx: &RunContext) -> EstimateSpec {
    let ens = &ctx.config.experiment.ensemble;
    let mut spec = EstimateSpec::new(ctx.params.mu, ens.t_end, ens.n_traj, ctx.config.seed);
    if let Some(b) = ens.burn_in {
        spec.burn_in = b;
        spec.window = ens.t_end - b;
    }
    if let Some(dt) = ens.snapshot_dt {
        spec.snapshot_dt = dt;
    }
    spec
}

pub fn ensemble(ctx: &RunContext) -> anyhow::Result<String> {
    let ens = &ctx.config.experiment.ensemble;
    let init = ctx.init_or_default(&ens.init)?;
    let spec = estimate_spec(ctx);
    let est = estimate_qsd_birth_rate(&ctx.params, &init, &spec, 0, ctx.threads)?;
    let analytic = match qsd::solve_bbar(&ctx.params, &ctx.config.numerics) {
        Ok(s) => Some(s.bbar),
        Err(Error::NoPositiveEquilibrium { .. } | Error::InvalidParams(_)) => None,
        Err(e) => return Err(e.into()),
    };
    write_conditioned_series_csv(&ctx.path("series.csv"), &est.series)?;
    write_json(
        &ctx.path("estimate.json"),
        &json!({
            "estimate": est.estimate,
            "stderr": est.stderr,
            "n_trajectories": spec.n_traj,
            "n_contributing": est.n_contributing,
            "n_surviving": est.n_surviving,
            "burn_in": spec.burn_in,
            "window": spec.window,
            "bbar_analytic": analytic,
            "rel_gap": analytic.map(|a| (est.estimate - a).abs() / a),
        }),
    )?;
    let s = &est.series;
    let mut points = Vec::new();
    for (i, &t) in s.times.iter().enumerate() {
        if let Some(b) = s.mean_birth_rate[i] {
            points.push(PlotPoint::new("mean_birth_rate", t, b));
        }
        if let Some(n) = s.mean_population[i] {
            points.push(PlotPoint::new("mean_population", t, n));
        }
        points.push(PlotPoint::new("surviving", t, s.surviving_count[i] as f64));
    }
    if let Some(a) = analytic {
        for &t in [0.0, ens.t_end].iter() {
            points.push(PlotPoint::new("bbar_analytic", t, a));
        }
    }
    write_plot_csv(&ctx.path("plot.csv"), &points)?;
    ctx.finish(vec!["series.csv", "estimate.json", "plot.csv"])?;
    Ok(format!(
        "conditioned mean birth rate {} ± {} over {} trajectories",
        est.estimate, est.stderr, spec.n_traj
    ))
}

pub fn sweep(ctx: &RunContext) -> anyhow::Result<String> {
    let sw = &ctx.config.experiment.sweep;
    let budget = sw.simulate.then(|| SimBudget {
        estimate: estimate_spec(ctx),
        threads: ctx.threads,
    });
    let rows = sweep_area(
        &ctx.params,
        &sw.areas,
        &ctx.config.numerics,
        budget.as_ref(),
    )?;
    write_sweep_csv(&ctx.path("sweep.csv"), &rows)?;
    write_json(&ctx.path("sweep.json"), &rows)?;
    let mut points = Vec::new();
    for r in &rows {
        points.push(PlotPoint::new("bbar_analytic", r.area, r.bbar_analytic));
        points.push(PlotPoint::new("bbar_scaled", r.area, r.bbar_scaled));
        if let Some(b) = r.bbar_sim {
            points.push(PlotPoint::new("bbar_sim", r.area, b));
        }
    }
    write_plot_csv(&ctx.path("plot.csv"), &points)?;
    ctx.finish(vec!["sweep.csv", "sweep.json", "plot.csv"])?;
    let worst = rows
        .iter()
        .filter_map(|r| r.rel_gap_sim)
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.max(g))));
    Ok(match worst {
        Some(w) => format!(
            "{} areas, largest simulation gap {:.2}%",
            rows.len(),
            100.0 * w
        ),
        None => format!("{} areas", rows.len()),
    })
}

pub fn verify(ctx: &RunContext) -> anyhow::Result<String> {
    let rows = identity_suite(&ctx.config.numerics)?;
    write_verify_csv(&ctx.path("verify.csv"), &rows)?;
    let failed = rows.iter().filter(|r| !r.pass).count();
    let worst = rows
        .iter()
        .map(|r| r.error / r.tolerance)
        .fold(0.0, f64::max);
    write_json(
        &ctx.path("verify.json"),
        &json!({ "checks": rows.len(), "failed": failed, "worst_error_to_tolerance": worst }),
    )?;
    ctx.finish(vec!["verify.csv", "verify.json"])?;
    if failed > 0 {
        return Err(VerifyFailed(failed).into());
    }
    Ok(format!("{} identity checks passed", rows.len()))
}
