use std::fs::{self, File};
use std::path::Path as FsPath;

use super::config::ScenarioConfig;
use super::metrics::{RunMetrics, TrajectorySample};
use super::sim::StepRecord;
use crate::error::{Error, Result};

/// Column order of `steps.csv`. Solver columns are empty without a
/// controller. Wall-clock timings live in `timing.csv` so that the step log
/// stays byte-identical between runs.
pub const STEP_COLUMNS: [&str; 34] = [
    "step",
    "t",
    "x",
    "y",
    "psi",
    "delta",
    "v",
    "displayed_x",
    "displayed_y",
    "displayed_psi",
    "displayed_delta",
    "displayed_v",
    "ghost_x",
    "ghost_y",
    "ghost_psi",
    "issued_delta_ref",
    "issued_v_ref",
    "delta_ref",
    "v_ref",
    "delta_rate",
    "a",
    "authority_dev",
    "potential",
    "clearance",
    "status",
    "sqp_iterations",
    "kkt_residual",
    "cost",
    "slack_delta",
    "max_slack_delta",
    "max_slack_potential",
    "fallback",
    "external",
    "mode",
];

pub const STEPS_FILE: &str = "steps.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFIG_FILE: &str = "config.json";

fn io_err(path: &FsPath) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn step_row(r: &StepRecord, mode: &str) -> Vec<String> {
    let f = |v: f64| v.to_string();
    let s = &r.state;
    let d = &r.displayed;
    let g = &r.ghost;
    let mut row = vec![
        r.step.to_string(),
        f(r.t),
        f(s.x),
        f(s.y),
        f(s.psi),
        f(s.delta),
        f(s.v),
        f(d.x),
        f(d.y),
        f(d.psi),
        f(d.delta),
        f(d.v),
        f(g.x),
        f(g.y),
        f(g.psi),
        f(r.issued.delta_ref),
        f(r.issued.v_ref),
        f(r.applied.delta_ref),
        f(r.applied.v_ref),
        f(r.input.delta_rate),
        f(r.input.a),
        f(r.authority_dev),
        f(r.potential),
        f(r.clearance),
    ];
    match &r.solver {
        Some(sd) => row.extend([
            sd.status.as_str().to_string(),
            sd.iterations.to_string(),
            f(sd.kkt_residual),
            f(sd.cost),
            f(sd.slack_delta),
            f(sd.max_slack_delta),
            f(sd.max_slack_potential),
        ]),
        None => row.extend(std::iter::repeat_n(String::new(), 7)),
    }
    row.push(u8::from(r.fallback).to_string());
    row.push(u8::from(r.external).to_string());
    row.push(mode.to_string());
    row
}

/// Writes `steps.csv`, `timing.csv`, `metrics.json` and the resolved
/// `config.json` into `out_dir`, creating it if needed.
pub fn emit_logs(
    records: &[StepRecord],
    metrics: &RunMetrics,
    config: &ScenarioConfig,
    out_dir: impl AsRef<FsPath>,
) -> Result<()> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mode = config.mode.to_string();

    let path = dir.join(STEPS_FILE);
    let mut w = csv::Writer::from_writer(File::create(&path).map_err(io_err(&path))?);
    w.write_record(STEP_COLUMNS)?;
    for r in records {
        w.write_record(step_row(r, &mode))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(TIMING_FILE);
    let mut w = csv::Writer::from_writer(File::create(&path).map_err(io_err(&path))?);
    w.write_record(["step", "t", "solve_time"])?;
    for r in records {
        let time = r.solver.map(|s| s.solve_time.to_string()).unwrap_or_default();
        w.write_record([r.step.to_string(), r.t.to_string(), time])?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(METRICS_FILE);
    fs::write(&path, serde_json::to_string_pretty(metrics)?).map_err(io_err(&path))?;
    let path = dir.join(CONFIG_FILE);
    fs::write(&path, serde_json::to_string_pretty(config)?).map_err(io_err(&path))?;
    Ok(())
}

/// Reads the CoM trajectory back from a run directory or a `steps.csv`.
pub fn read_trajectory(path: impl AsRef<FsPath>) -> Result<Vec<TrajectorySample>> {
    let path = path.as_ref();
    let file = if path.is_dir() {
        path.join(STEPS_FILE)
    } else {
        path.to_path_buf()
    };
    let mut reader = csv::Reader::from_path(&file)?;
    reader
        .deserialize::<TrajectorySample>()
        .map(|row| row.map_err(Error::from))
        .collect()
}
