//! Active safety system for teleoperated road vehicles.
//!
//! An MPC tracks the remote operator's steering and speed commands and only
//! intervenes, within a bounded steering authority, when a superellipse
//! potential field says an obstacle is too close. The crate also contains
//! the latency pipeline (delay buffers, two predictive displays, the
//! authority cone shown to the operator), a simulated operator and a
//! deterministic closed-loop simulator.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod latency;
pub mod mpc;
pub mod operator;
pub mod qp;
pub mod scenario;

pub use error::{ConfigError, Error, Result};
