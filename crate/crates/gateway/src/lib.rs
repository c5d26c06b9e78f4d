//! Network boundary of the teleoperation simulator: the `/teleop`
//! websocket endpoint, its JSON frames and the `teleop-sim` command line.

pub mod cli;
pub mod client;
pub mod frames;
pub mod server;

pub use frames::{CommandFrame, SCHEMA_VERSION, StateFrame};
pub use server::{ENDPOINT, Pacing, STOP_RAMP, ServeOutcome, ServeReport, bind, serve};
