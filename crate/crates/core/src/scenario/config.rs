use std::fmt;
use std::path::Path as FsPath;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{VehicleParams, VehicleState};
use crate::error::{ConfigError, Error, Result, ensure};
use crate::geometry::{EgoDiscs, Footprint, Obstacle};
use crate::latency::LatencyConfig;
use crate::mpc::MpcConfig;
use crate::operator::OperatorConfig;

/// Which controller sits between the operator and the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Active safety MPC.
    #[default]
    Ass,
    /// Steering-only MPC without the authority band.
    #[serde(alias = "baseline_controller")]
    Baseline,
    /// Operator commands go straight to the low-level actuators.
    #[serde(alias = "no_controller")]
    None,
}

/// Predictive display shown to the operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Display {
    /// The delayed state as received.
    #[default]
    None,
    /// Constant steering and speed rollout over the round trip.
    Baseline,
    /// The MPC prediction at the round-trip horizon.
    Mpc,
}

macro_rules! cli_enum {
    ($ty:ident { $($name:literal => $variant:ident),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = ConfigError;

            fn from_str(s: &str) -> Result<Self, ConfigError> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(ConfigError::new(
                        stringify!($ty).to_lowercase(),
                        format!("unknown value `{other}`"),
                    )),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self {
                    $($ty::$variant => $name,)+
                };
                f.write_str(name)
            }
        }
    };
}

cli_enum!(Mode { "ass" => Ass, "baseline" => Baseline, "none" => None });
cli_enum!(Display { "none" => None, "baseline" => Baseline, "mpc" => Mpc });

/// Complete description of one closed-loop experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Simulated time (s).
    pub duration: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub display: Display,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to standing still at the origin.
    #[serde(default)]
    pub initial_state: VehicleState,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub footprint: Footprint,
    #[serde(default)]
    pub discs: EgoDiscs,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub operator: OperatorConfig,
    #[serde(default)]
    pub mpc: MpcConfig,
    #[serde(default)]
    pub latency: LatencyConfig,
}

impl ScenarioConfig {
    pub fn new(duration: f64, operator: OperatorConfig) -> Self {
        Self {
            name: String::new(),
            description: None,
            duration,
            mode: Mode::default(),
            display: Display::default(),
            seed: 0,
            initial_state: VehicleState::default(),
            vehicle: VehicleParams::default(),
            footprint: Footprint::default(),
            discs: EgoDiscs::default(),
            obstacles: Vec::new(),
            operator,
            mpc: MpcConfig::default(),
            latency: LatencyConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(
            self.duration.is_finite() && self.duration > 0.0,
            "duration",
            "must be positive",
        )?;
        self.vehicle.validate()?;
        self.footprint.validate()?;
        self.discs.validate()?;
        for (i, o) in self.obstacles.iter().enumerate() {
            o.validate(&format!("obstacles[{i}]"))?;
        }
        self.operator.validate()?;
        self.mpc.validate()?;
        ensure(
            self.initial_state.is_finite(),
            "initial_state",
            "must be finite",
        )?;
        ensure(
            self.vehicle.delta_limits.contains(self.initial_state.delta)
                && self.vehicle.v_limits.contains(self.initial_state.v),
            "initial_state",
            "steering angle and speed must lie within the vehicle limits",
        )?;
        let (actuator, glass) = self.latency.steps(self.mpc.t_s)?;
        if self.display == Display::Mpc {
            ensure(
                self.mode != Mode::None,
                "display",
                "the mpc display needs a controller (mode ass or baseline)",
            )?;
            ensure(
                actuator + glass < self.mpc.horizon,
                "latency",
                "round trip must be shorter than the prediction horizon",
            )?;
        }
        Ok(())
    }

    /// Number of simulation steps, `⌈duration / t_s⌉`.
    pub fn steps(&self) -> usize {
        (self.duration / self.mpc.t_s - 1e-9).ceil() as usize
    }
}

/// Parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<FsPath>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config: ScenarioConfig = serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    config.validate()?;
    Ok(config)
}
