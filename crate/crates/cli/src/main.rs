//! `hierpop` command-line interface.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 no positive
//! equilibrium, 3 every trajectory went extinct, 4 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hierpop::Error;

use commands::{RunContext, VerifyFailed};
use config::{ConfigError, RunConfig, PRESETS};

#[derive(Parser)]
#[command(
    name = "hierpop",
    version,
    about = "Size-structured birth-death population: solvers, simulation and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic stationary birth rate and size profile.
    DetSolve(Common),
    /// Quasi-stationary birth rate, mean size-at-age and size density.
    QsdSolve {
        #[command(flatten)]
        common: Common,
        /// Use the closed-form equation (requires z0 * area = 1 and x_m = 0).
        #[arg(long)]
        closed_form: bool,
    },
    /// One exact trajectory with its event log and snapshots.
    Simulate(Common),
    /// Conditioned ensemble mean of the birth rate and its time average.
    Ensemble(Common),
    /// Quasi-stationary and deterministic birth rates across habitat areas.
    SweepArea(Common),
    /// Numerical identity suite; fails if any check misses its tolerance.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long, value_parser = PRESETS)]
    preset: Option<String>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for ensembles. Results do not depend on it.
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load(common: &Common, name: &str) -> anyhow::Result<(RunConfig, PathBuf)> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(p)) => RunConfig::preset(p)?,
        (None, None) if name == "verify" => RunConfig::preset("fig3")?,
        (None, None) => {
            return Err(ConfigError("one of --config or --preset is required".into()).into())
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("hierpop-out").join(name));
    cfg.output_dir = Some(out.clone());
    Ok((cfg, out))
}

fn run(cli: Cli) -> anyhow::Result<String> {
    type Handler = fn(&RunContext) -> anyhow::Result<String>;
    let (name, common, closed_form, handler): (&'static str, &Common, bool, Handler) =
        match &cli.command {
            Command::DetSolve(c) => ("det-solve", c, false, commands::det_solve),
            Command::QsdSolve {
                common,
                closed_form,
            } => ("qsd-solve", common, *closed_form, commands::qsd_solve),
            Command::Simulate(c) => ("simulate", c, false, commands::simulate_cmd),
            Command::Ensemble(c) => ("ensemble", c, false, commands::ensemble),
            Command::SweepArea(c) => ("sweep-area", c, false, commands::sweep),
            Command::Verify(c) => ("verify", c, false, commands::verify),
        };
    if common.threads == 0 {
        return Err(ConfigError("--threads must be >= 1".into()).into());
    }
    let (cfg, out) = load(common, name)?;
    let params = cfg.model.resolve()?;
    commands::ensure_dir(&out)?;
    let ctx = RunContext {
        command: name,
        config: &cfg,
        params,
        out,
        threads: common.threads,
        closed_form,
    };
    handler(&ctx)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 1;
    }
    if err.downcast_ref::<VerifyFailed>().is_some() {
        return 4;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::NoPositiveEquilibrium { .. }) => 2,
        Some(Error::AllExtinct { .. }) => 3,
        Some(Error::InvalidParams(_) | Error::Domain(_) | Error::Io(_)) | None => 1,
        Some(
            Error::NoConvergence { .. }
            | Error::Singularity(_)
            | Error::NoRootInBracket { .. }
            | Error::MultipleRootsDetected { .. }
            | Error::DegenerateEquation { .. }
            | Error::TruncationFailure { .. }
            | Error::EventCapExceeded { .. },
        ) => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
