//! CSV and JSON writers for solutions, trajectories and experiment tables.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so the
//! same values always produce the same bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::det::DetSolution;
use crate::error::Result;
use crate::experiments::{AreaSweepRow, ConditionedSeries};
use crate::qsd::QsdSolution;
use crate::sim::{EventKind, Trajectory};
use crate::verify::VerifyRow;

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().from_writer(BufWriter::new(File::create(path)?)))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Columns: `age, size, survival, density_x, density_val`.
pub fn write_det_solution_csv(path: &Path, sol: &DetSolution) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["age", "size", "survival", "density_x", "density_val"])?;
    for i in 0..sol.ages.len() {
        w.write_record([
            sol.ages[i].to_string(),
            sol.sizes[i].to_string(),
            sol.survival[i].to_string(),
            sol.sizes[i].to_string(),
            sol.densities[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `age, mean_size, survival, size, density`.
pub fn write_qsd_solution_csv(path: &Path, sol: &QsdSolution) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["age", "mean_size", "survival", "size", "density"])?;
    for i in 0..sol.ages.len() {
        w.write_record([
            sol.ages[i].to_string(),
            sol.sizes[i].to_string(),
            sol.survival[i].to_string(),
            sol.sizes[i].to_string(),
            sol.densities[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `time, kind, removed_rank, n_after`.
pub fn write_events_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["time", "kind", "removed_rank", "n_after"])?;
    for e in &traj.events {
        let (kind, rank) = match e.kind {
            EventKind::Birth => ("birth", String::new()),
            EventKind::Death { removed_rank } => ("death", removed_rank.to_string()),
        };
        w.write_record([
            e.time.to_string(),
            kind.to_string(),
            rank,
            e.n_after.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `time, n, total_size, birth_rate, sizes`, where `sizes` is a
/// space-separated list, empty when sizes were not recorded.
pub fn write_snapshots_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["time", "n", "total_size", "birth_rate", "sizes"])?;
    for s in &traj.snapshots {
        let sizes = s
            .sizes
            .as_ref()
            .map(|v| {
                v.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .unwrap_or_default();
        w.write_record([
            s.time.to_string(),
            s.n.to_string(),
            s.total_size.to_string(),
            s.birth_rate.to_string(),
            sizes,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `time, mean_birth_rate, mean_population, surviving_count`.
pub fn write_conditioned_series_csv(path: &Path, series: &ConditionedSeries) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "time",
        "mean_birth_rate",
        "mean_population",
        "surviving_count",
    ])?;
    for i in 0..series.times.len() {
        w.write_record([
            series.times[i].to_string(),
            opt(series.mean_birth_rate[i]),
            opt(series.mean_population[i]),
            series.surviving_count[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `area, bbar_analytic, bbar_sim, bbar_sim_stderr, bbar_det,
/// bbar_scaled, rel_gap_limit, rel_gap_sim`.
pub fn write_sweep_csv(path: &Path, rows: &[AreaSweepRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "area",
        "bbar_analytic",
        "bbar_sim",
        "bbar_sim_stderr",
        "bbar_det",
        "bbar_scaled",
        "rel_gap_limit",
        "rel_gap_sim",
    ])?;
    for r in rows {
        w.write_record([
            r.area.to_string(),
            r.bbar_analytic.to_string(),
            opt(r.bbar_sim),
            opt(r.bbar_sim_stderr),
            r.bbar_det.to_string(),
            r.bbar_scaled.to_string(),
            r.rel_gap_limit.to_string(),
            opt(r.rel_gap_sim),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One point of a plot-ready long table.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

impl PlotPoint {
    pub fn new(series: &str, x: f64, y: f64) -> Self {
        Self {
            series: series.to_string(),
            x,
            y,
        }
    }
}

/// Columns: `series, x, y`.
pub fn write_plot_csv(path: &Path, points: &[PlotPoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["series", "x", "y"])?;
    for p in points {
        w.write_record([p.series.clone(), p.x.to_string(), p.y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `check, case, lhs, rhs, error, tolerance, pass`.
pub fn write_verify_csv(path: &Path, rows: &[VerifyRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["check", "case", "lhs", "rhs", "error", "tolerance", "pass"])?;
    for r in rows {
        w.write_record([
            r.check.to_string(),
            r.case.clone(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.error.to_string(),
            r.tolerance.to_string(),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
