use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{Display, Mode, ScenarioConfig};
use crate::dynamics::{ControlInput, VehicleState, plant_step, rollout};
use crate::error::ConfigError;
use crate::geometry::{Obstacle, potential_total, signed_distance};
use crate::latency::{
    AuthorityCone, DelayBuffer, authority_cone_along, predictive_display_baseline,
};
use crate::mpc::{
    BASELINE_SPEED_GAIN, ControllerMode, MpcController, OcpSolution, OperatorReference, SolveStatus,
};
use crate::operator::SimulatedOperator;

/// Slacks above this count as active.
pub const SLACK_ACTIVE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub status: SolveStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub cost: f64,
    /// Wall-clock time (s). Not part of the deterministic log.
    pub solve_time: f64,
    /// `s^δ` of the first predicted stage.
    pub slack_delta: f64,
    pub max_slack_delta: f64,
    pub max_slack_potential: f64,
}

impl SolverDiagnostics {
    fn of(solution: &OcpSolution) -> Self {
        Self {
            status: solution.status,
            iterations: solution.iterations,
            kkt_residual: solution.kkt_residual,
            cost: solution.cost,
            solve_time: solution.solve_time,
            slack_delta: solution.slacks.first().map_or(0.0, |s| s.delta),
            max_slack_delta: solution.max_delta_slack(),
            max_slack_potential: solution.max_potential_slack(),
        }
    }
}

/// Everything that happened during one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// Plant state at `t`.
    pub state: VehicleState,
    /// State as received at the workstation.
    pub displayed: VehicleState,
    /// Pose the operator steers by (the predictive display, or `displayed`).
    pub ghost: VehicleState,
    /// Reference produced at the workstation during this sample.
    pub issued: OperatorReference,
    /// Reference reaching the vehicle after the actuator delay.
    pub applied: OperatorReference,
    pub input: ControlInput,
    /// `δ(t + t_s) − δ_ref`, the steering deviation produced by this sample.
    pub authority_dev: f64,
    pub solver: Option<SolverDiagnostics>,
    /// Potential field at the plant state.
    pub potential: f64,
    /// Smallest footprint to obstacle distance (m); infinite without obstacles.
    pub clearance: f64,
    /// Braking fallback applied after an infeasible QP.
    pub fallback: bool,
    /// Reference came from an external command rather than the simulated
    /// operator.
    pub external: bool,
}

impl StepRecord {
    pub fn slack_delta(&self) -> f64 {
        self.solver.map_or(0.0, |s| s.slack_delta)
    }
}

/// What the workstation sees for one sample: everything here left the
/// vehicle `glass_delay` earlier.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub t: f64,
    pub state: VehicleState,
    pub obstacles: Vec<Obstacle>,
    pub solution: Option<OcpSolution>,
    pub cone: Option<AuthorityCone>,
}

/// Record of one sample plus the view and ghost used by the operator.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub record: StepRecord,
    pub view: View,
}

/// Deterministic closed loop: delayed view, operator, actuator delay,
/// controller, plant.
pub struct Simulation {
    config: ScenarioConfig,
    operator: SimulatedOperator,
    controller: Option<MpcController>,
    actuator: DelayBuffer<OperatorReference>,
    glass: DelayBuffer<View>,
    glass_steps: usize,
    ghost_index: usize,
    state: VehicleState,
    obstacles: Vec<Obstacle>,
    view: View,
    last_solution: Option<OcpSolution>,
    step: usize,
    steps: usize,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let t_s = config.mpc.t_s;
        let (actuator_steps, glass_steps) = config.latency.steps(t_s)?;
        let controller_mode = match config.mode {
            Mode::Ass => Some(ControllerMode::ActiveSafety),
            Mode::Baseline => Some(ControllerMode::Baseline),
            Mode::None => None,
        };
        let controller = controller_mode
            .map(|m| MpcController::new(config.mpc, config.vehicle, config.discs, m));
        let initial_view = View {
            t: 0.0,
            state: config.initial_state,
            obstacles: config.obstacles.clone(),
            solution: None,
            cone: None,
        };
        Ok(Self {
            operator: SimulatedOperator::new(config.operator.clone(), config.vehicle),
            controller,
            actuator: DelayBuffer::new(actuator_steps, OperatorReference::new(0.0, 0.0)),
            glass: DelayBuffer::new(glass_steps.saturating_sub(1), initial_view.clone()),
            glass_steps,
            // The view of sample j carries the solution of sample j − g
            // (j − 1 without glass delay), whose states[k] predicts
            // j − g + k; the ghost must land on j + actuator delay.
            ghost_index: if glass_steps == 0 {
                actuator_steps + 1
            } else {
                glass_steps + actuator_steps
            },
            state: config.initial_state,
            obstacles: config.obstacles.clone(),
            view: initial_view,
            last_solution: None,
            step: 0,
            steps: config.steps(),
            config,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.mpc.t_s
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn total_steps(&self) -> usize {
        self.steps
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.steps
    }

    fn ghost(&self, view: &View) -> VehicleState {
        let t_s = self.config.mpc.t_s;
        match self.config.display {
            Display::None => view.state,
            Display::Baseline => predictive_display_baseline(
                &view.state,
                self.config.latency.round_trip(),
                t_s,
                &self.config.vehicle,
            ),
            Display::Mpc => view
                .solution
                .as_ref()
                .and_then(|s| s.states.get(self.ghost_index).copied())
                .unwrap_or(view.state),
        }
    }

    fn current_view(&self) -> View {
        if self.glass_steps == 0 {
            View {
                t: self.time(),
                state: self.state,
                obstacles: self.obstacles.clone(),
                ..self.view.clone()
            }
        } else {
            self.view.clone()
        }
    }

    /// The view and ghost pose the operator will steer by in the next
    /// [`step`](Self::step).
    pub fn upcoming(&self) -> (View, VehicleState) {
        let view = self.current_view();
        let ghost = self.ghost(&view);
        (view, ghost)
    }

    /// Advances one sample. `command` replaces the simulated operator for
    /// this sample and is clamped to the vehicle limits first.
    pub fn step(&mut self, command: Option<OperatorReference>) -> StepOutput {
        let t_s = self.config.mpc.t_s;
        let t = self.time();
        let vehicle = self.config.vehicle;

        let (view, ghost) = self.upcoming();
        let issued = match command {
            Some(c) => c.clamped(&vehicle),
            None => self.operator.reference(&ghost, t),
        };
        let applied = self.actuator.push(t, issued);

        let (input, solution) = match self.controller.as_mut() {
            Some(c) => {
                let (u, sol) = c.step(&self.state, &applied, &self.obstacles);
                (u, Some(sol))
            }
            None => (self.direct_input(&applied), None),
        };
        let fallback = solution
            .as_ref()
            .is_some_and(|s| s.status == SolveStatus::InfeasibleQp);

        let potential = potential_total(
            &self.state,
            &self.obstacles,
            &self.config.discs,
            &self.config.mpc.potential,
        );
        let footprint = self.config.footprint.rect(&self.state);
        let clearance = self
            .obstacles
            .iter()
            .map(|o| signed_distance(&footprint, &o.rect()))
            .fold(f64::INFINITY, f64::min);

        let next = plant_step(&self.state, &input, &vehicle, t_s);
        let record = StepRecord {
            step: self.step,
            t,
            state: self.state,
            displayed: view.state,
            ghost,
            issued,
            applied,
            input,
            authority_dev: next.delta - applied.delta_ref,
            solver: solution.as_ref().map(SolverDiagnostics::of),
            potential,
            clearance,
            fallback,
            external: command.is_some(),
        };

        let planned = match &solution {
            Some(s) => s.states.clone(),
            None => {
                let hold = vec![input; self.config.mpc.horizon];
                rollout(&self.state, &hold, t_s, &vehicle)
            }
        };
        let cone = authority_cone_along(&self.state, applied.delta_ref, &planned, &self.config.mpc, &vehicle);
        let sent = View {
            t,
            state: self.state,
            obstacles: self.obstacles.clone(),
            solution: solution.clone(),
            cone: Some(cone),
        };
        if self.glass_steps == 0 {
            self.view = sent;
        } else {
            self.view = self.glass.push(t, sent);
        }

        self.state = next;
        for o in &mut self.obstacles {
            *o = o.advanced(t_s);
        }
        self.last_solution = solution;
        self.step += 1;
        StepOutput { record, view }
    }

    fn direct_input(&self, r: &OperatorReference) -> ControlInput {
        let p = &self.config.vehicle;
        let z = &self.state;
        ControlInput {
            delta_rate: p.delta_rate_limits.clamp((r.delta_ref - z.delta) / self.config.mpc.t_s),
            a: p.a_limits.clamp(BASELINE_SPEED_GAIN * (r.v_ref - z.v)),
        }
    }

    pub fn last_solution(&self) -> Option<&OcpSolution> {
        self.last_solution.as_ref()
    }
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    /// Wall-clock duration of the whole run (s).
    pub wall_time: f64,
}

/// Runs a scenario to completion with the simulated operator.
pub fn simulate(config: &ScenarioConfig) -> Result<RunOutput, ConfigError> {
    let start = Instant::now();
    let mut sim = Simulation::new(config.clone())?;
    let mut records = Vec::with_capacity(sim.total_steps());
    while !sim.is_finished() {
        records.push(sim.step(None).record);
    }
    Ok(RunOutput {
        records,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
