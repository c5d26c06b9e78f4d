//! Scenario files, the closed-loop simulator, metrics and logs.

mod config;
mod logs;
mod metrics;
mod random;
mod sim;

use std::thread;

pub use config::{Display, Mode, ScenarioConfig, load_scenario};
pub use logs::{
    CONFIG_FILE, METRICS_FILE, STEP_COLUMNS, STEPS_FILE, TIMING_FILE, emit_logs, read_trajectory,
};
pub use metrics::{
    Deviation, RunMetrics, SolveTimeSummary, TrajectorySample, VelocitySummary, compare_runs,
    compare_runs_shifted, compare_shifted, compare_trajectories,
};
pub use random::random_scenario;
pub use sim::{
    RunOutput, SLACK_ACTIVE, Simulation, SolverDiagnostics, StepOutput, StepRecord, View, simulate,
};

use crate::error::ConfigError;

/// Runs a scenario and summarises it.
pub fn run(config: &ScenarioConfig) -> Result<(RunMetrics, Vec<StepRecord>), ConfigError> {
    let out = simulate(config)?;
    let mut metrics = RunMetrics::from_records(&out.records);
    if out.wall_time > 0.0 {
        metrics.real_time_factor = Some(out.records.len() as f64 * config.mpc.t_s / out.wall_time);
    }
    Ok((metrics, out.records))
}

/// Runs independent scenarios on up to `workers` threads; results keep the
/// input order.
pub fn sweep(
    configs: &[ScenarioConfig],
    workers: usize,
) -> Vec<Result<(RunMetrics, Vec<StepRecord>), ConfigError>> {
    let workers = workers.clamp(1, configs.len().max(1));
    let chunk = configs.len().div_ceil(workers).max(1);
    thread::scope(|scope| {
        let handles: Vec<_> = configs
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(run).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}
