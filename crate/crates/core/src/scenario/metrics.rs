use serde::{Deserialize, Serialize};

use super::sim::{SLACK_ACTIVE, StepRecord};
use crate::mpc::SolveStatus;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocitySummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub last: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveTimeSummary {
    pub mean: f64,
    pub p99: f64,
    pub max: f64,
    pub max_iterations: usize,
    pub max_iter_steps: usize,
    pub fallback_steps: usize,
}

/// CoM deviation between two runs at matching timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Deviation {
    pub max: f64,
    pub mean: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub steps: usize,
    pub collided: bool,
    /// Smallest footprint to obstacle distance over the run (m); absent
    /// without obstacles.
    pub min_clearance: Option<f64>,
    /// First time the footprint touched an obstacle (s).
    pub collision_time: Option<f64>,
    pub max_authority_dev: f64,
    pub max_slack_delta: f64,
    /// Samples whose first-stage `s^δ` exceeded [`SLACK_ACTIVE`].
    pub slack_active_steps: usize,
    pub velocity: VelocitySummary,
    /// Absent when no controller ran.
    pub solve_time: Option<SolveTimeSummary>,
    /// Simulated time over wall-clock time.
    pub real_time_factor: Option<f64>,
    /// Against the reference run, when one was given.
    pub deviation: Option<Deviation>,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl RunMetrics {
    pub fn from_records(records: &[StepRecord]) -> Self {
        let min_clearance = records.iter().map(|r| r.clearance).fold(f64::INFINITY, f64::min);
        let collision_time = records.iter().find(|r| r.clearance <= 0.0).map(|r| r.t);
        let v: Vec<f64> = records.iter().map(|r| r.state.v).collect();
        let velocity = VelocitySummary {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: v.iter().sum::<f64>() / v.len().max(1) as f64,
            last: v.last().copied().unwrap_or(0.0),
        };
        let solved: Vec<_> = records.iter().filter_map(|r| r.solver).collect();
        let solve_time = (!solved.is_empty()).then(|| {
            let mut times: Vec<f64> = solved.iter().map(|s| s.solve_time).collect();
            times.sort_by(f64::total_cmp);
            SolveTimeSummary {
                mean: times.iter().sum::<f64>() / times.len() as f64,
                p99: percentile(&times, 0.99),
                max: *times.last().expect("non-empty"),
                max_iterations: solved.iter().map(|s| s.iterations).max().unwrap_or(0),
                max_iter_steps: solved.iter().filter(|s| s.status == SolveStatus::MaxIter).count(),
                fallback_steps: records.iter().filter(|r| r.fallback).count(),
            }
        });
        Self {
            steps: records.len(),
            collided: min_clearance <= 0.0,
            min_clearance: min_clearance.is_finite().then_some(min_clearance),
            collision_time,
            max_authority_dev: records.iter().map(|r| r.authority_dev.abs()).fold(0.0, f64::max),
            max_slack_delta: records.iter().map(|r| r.slack_delta()).fold(0.0, f64::max),
            slack_active_steps: records.iter().filter(|r| r.slack_delta() > SLACK_ACTIVE).count(),
            velocity,
            solve_time,
            real_time_factor: None,
            deviation: None,
        }
    }
}

/// One CoM sample of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl From<&StepRecord> for TrajectorySample {
    fn from(r: &StepRecord) -> Self {
        Self {
            t: r.t,
            x: r.state.x,
            y: r.state.y,
        }
    }
}

/// Max and mean CoM distance at matching timestamps over the common part.
pub fn compare_trajectories(a: &[TrajectorySample], b: &[TrajectorySample]) -> Deviation {
    compare_shifted(a, b, 0)
}

/// Compares `a[j]` with `b[j + shift]`, timestamps re-based by the shift.
pub fn compare_shifted(a: &[TrajectorySample], b: &[TrajectorySample], shift: usize) -> Deviation {
    let pairs = a.iter().zip(b.iter().skip(shift));
    let mut max = 0.0f64;
    let mut sum = 0.0;
    let mut samples = 0;
    for (p, q) in pairs {
        let d = (p.x - q.x).hypot(p.y - q.y);
        max = max.max(d);
        sum += d;
        samples += 1;
    }
    Deviation {
        max,
        mean: if samples == 0 { 0.0 } else { sum / samples as f64 },
        samples,
    }
}

/// [`compare_trajectories`] on two sets of step records.
pub fn compare_runs(a: &[StepRecord], b: &[StepRecord]) -> Deviation {
    compare_runs_shifted(a, b, 0)
}

/// Compares run `a` with run `b` delayed by `shift` samples. With a pure
/// actuator delay the delayed vehicle does what the undelayed one did
/// `shift` samples earlier.
pub fn compare_runs_shifted(a: &[StepRecord], b: &[StepRecord], shift: usize) -> Deviation {
    let a: Vec<_> = a.iter().map(TrajectorySample::from).collect();
    let b: Vec<_> = b.iter().map(TrajectorySample::from).collect();
    compare_shifted(&a, &b, shift)
}
