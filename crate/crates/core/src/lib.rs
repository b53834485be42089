//! Simulation of robot swarms whose control loop runs over a lossy,
//! slot-scheduled wireless network.
//!
//! The crate is layered bottom-up: [`world`] (agents and kinematics),
//! [`propagation`] (link quality), [`mac`] (slot schedule, delivery, joining),
//! [`control`] (potential fields and controllers), [`metrics`], and
//! [`harness`] (trials, batches, output files). [`sim`] ties one trial together.

// Validation is written as `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod error;
pub mod harness;
pub mod mac;
pub mod metrics;
pub mod propagation;
pub mod rng;
pub mod sim;
pub mod vec2;
pub mod world;

pub use config::{ConfigFile, ExperimentConfig};
pub use error::{ConfigError, Error, Result};
pub use harness::{run_batch, run_batch_to_dir, run_trial, BatchSummary, TrialSummary};
pub use sim::Simulation;
pub use vec2::Vec2;
