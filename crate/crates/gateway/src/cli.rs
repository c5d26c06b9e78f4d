//! `teleop-sim` command line.

use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;
use teleop_ass::latency::LatencyConfig;
use teleop_ass::scenario::{
    Display, Mode, RunMetrics, ScenarioConfig, StepRecord, compare_runs_shifted, compare_trajectories, emit_logs,
    load_scenario, read_trajectory, run, sweep,
};

use crate::server::{Pacing, bind, serve};

/// Environment variable holding the log filter, e.g. `info` or
/// `teleop_gateway=debug`.
pub const LOG_ENV: &str = "TELEOP_LOG";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Failure,
    Collision,
    ConfigError,
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> Self {
        ExitCode::from(match o {
            Outcome::Clean => 0,
            Outcome::Failure => 1,
            Outcome::Collision => 2,
            Outcome::ConfigError => 3,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "teleop-sim", version, about = "Closed-loop simulator for an MPC active safety system in teleoperated driving")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        display: Option<Display>,
        /// Round-trip latency, split between glass and actuator side.
        #[arg(long = "latency-ms")]
        latency_ms: Option<f64>,
        /// Directory for steps.csv, timing.csv, metrics.json, config.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Serve the `/teleop` websocket on this port while running.
        #[arg(long)]
        serve: Option<u16>,
        /// With --serve: wait for an operator and advance one step per command.
        #[arg(long, requires = "serve")]
        lockstep: bool,
    },
    /// Trajectory deviation between two runs (directories or steps.csv).
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Compare A against B delayed by this many samples.
        #[arg(long, default_value_t = 0)]
        shift: usize,
    },
    /// Run a scenario at several round-trip latencies.
    Sweep {
        scenario: PathBuf,
        #[arg(long = "latency-ms", value_delimiter = ',', required = true)]
        latency_ms: Vec<f64>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        display: Option<Display>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Debug, Serialize)]
struct SweepLine {
    latency_ms: f64,
    collided: bool,
    min_clearance: Option<f64>,
    max_authority_dev: f64,
    /// Against the zero-latency run, shifted by the actuator delay.
    max_deviation: f64,
    mean_deviation: f64,
}

fn with_latency(mut config: ScenarioConfig, latency_ms: f64) -> Result<ScenarioConfig, String> {
    config.latency = LatencyConfig::from_round_trip(latency_ms / 1000.0, config.mpc.t_s).map_err(|e| e.to_string())?;
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn load(path: &Path, mode: Option<Mode>, display: Option<Display>) -> Result<ScenarioConfig, String> {
    let mut config = load_scenario(path).map_err(|e| e.to_string())?;
    if let Some(m) = mode {
        config.mode = m;
    }
    if let Some(d) = display {
        config.display = d;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn write_logs(records: &[StepRecord], metrics: &RunMetrics, config: &ScenarioConfig, out: Option<&Path>) -> Result<(), Outcome> {
    if let Some(dir) = out {
        emit_logs(records, metrics, config, dir).map_err(|e| {
            eprintln!("error: {e}");
            Outcome::Failure
        })?;
        info!("logs written to {}", dir.display());
    }
    Ok(())
}

fn print_json(value: &impl Serialize) {
    match serde_json::to_string_pretty(value) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("error: {e}"),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    scenario: &Path,
    mode: Option<Mode>,
    display: Option<Display>,
    latency_ms: Option<f64>,
    out: Option<&Path>,
    port: Option<u16>,
    lockstep: bool,
) -> Result<Outcome, Outcome> {
    let config_error = |e: String| {
        eprintln!("config error: {e}");
        Outcome::ConfigError
    };
    let mut config = load(scenario, mode, display).map_err(config_error)?;
    if let Some(ms) = latency_ms {
        config = with_latency(config, ms).map_err(config_error)?;
    }
    let (metrics, records) = match port {
        Some(port) => {
            let listener = bind(SocketAddr::from((Ipv4Addr::UNSPECIFIED, port))).map_err(|e| {
                eprintln!("error: cannot listen on port {port}: {e}");
                Outcome::Failure
            })?;
            eprintln!("serving ws://0.0.0.0:{port}{}", crate::server::ENDPOINT);
            let pacing = if lockstep { Pacing::Lockstep } else { Pacing::Realtime };
            let outcome = serve(config.clone(), listener, pacing).map_err(|e| config_error(e.to_string()))?;
            info!("{:?}", outcome.report);
            (RunMetrics::from_records(&outcome.records), outcome.records)
        }
        None => run(&config).map_err(|e| config_error(e.to_string()))?,
    };
    write_logs(&records, &metrics, &config, out)?;
    print_json(&metrics);
    Ok(if metrics.collided { Outcome::Collision } else { Outcome::Clean })
}

fn cmd_compare(a: &Path, b: &Path, shift: usize) -> Result<Outcome, Outcome> {
    let read = |p: &Path| {
        read_trajectory(p).map_err(|e| {
            eprintln!("config error: {}: {e}", p.display());
            Outcome::ConfigError
        })
    };
    let (ta, tb) = (read(a)?, read(b)?);
    let deviation = if shift == 0 {
        compare_trajectories(&ta, &tb)
    } else {
        teleop_ass::scenario::compare_shifted(&ta, &tb, shift)
    };
    print_json(&deviation);
    Ok(Outcome::Clean)
}

fn cmd_sweep(
    scenario: &Path,
    latencies: &[f64],
    mode: Option<Mode>,
    display: Option<Display>,
    out: Option<&Path>,
    jobs: usize,
) -> Result<Outcome, Outcome> {
    let config_error = |e: String| {
        eprintln!("config error: {e}");
        Outcome::ConfigError
    };
    let base = load(scenario, mode, display).map_err(config_error)?;
    let mut reference = with_latency(base.clone(), 0.0).map_err(config_error)?;
    reference.display = Display::None;
    let mut configs = vec![reference];
    for &ms in latencies {
        configs.push(with_latency(base.clone(), ms).map_err(config_error)?);
    }
    let mut results = sweep(&configs, jobs).into_iter();
    let (_, zero) = results.next().expect("reference run").map_err(|e| config_error(e.to_string()))?;
    let mut collided = false;
    for ((ms, config), result) in latencies.iter().zip(&configs[1..]).zip(results) {
        let (metrics, records) = result.map_err(|e| config_error(e.to_string()))?;
        let (actuator, _) = config.latency.steps(config.mpc.t_s).map_err(|e| config_error(e.to_string()))?;
        let dev = compare_runs_shifted(&zero, &records, actuator);
        if let Some(dir) = out {
            write_logs(&records, &metrics, config, Some(&dir.join(format!("latency_{ms}ms"))))?;
        }
        collided |= metrics.collided;
        let line = SweepLine {
            latency_ms: *ms,
            collided: metrics.collided,
            min_clearance: metrics.min_clearance,
            max_authority_dev: metrics.max_authority_dev,
            max_deviation: dev.max,
            mean_deviation: dev.mean,
        };
        match serde_json::to_string(&line) {
            Ok(s) => println!("{s}"),
            Err(e) => eprintln!("error: {e}"),
        }
    }
    Ok(if collided { Outcome::Collision } else { Outcome::Clean })
}

pub fn execute(cli: Cli) -> Outcome {
    let result = match cli.command {
        Command::Run {
            scenario,
            mode,
            display,
            latency_ms,
            out,
            serve,
            lockstep,
        } => cmd_run(&scenario, mode, display, latency_ms, out.as_deref(), serve, lockstep),
        Command::Compare { run_a, run_b, shift } => cmd_compare(&run_a, &run_b, shift),
        Command::Sweep {
            scenario,
            latency_ms,
            mode,
            display,
            out,
            jobs,
        } => cmd_sweep(&scenario, &latency_ms, mode, display, out.as_deref(), jobs),
    };
    result.unwrap_or_else(|o| o)
}

/// Parses `args` and runs the command. Usage errors count as configuration
/// errors.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli).into(),
        Err(e) => {
            let code = if e.use_stderr() { Outcome::ConfigError } else { Outcome::Clean };
            let _ = e.print();
            code.into()
        }
    }
}
