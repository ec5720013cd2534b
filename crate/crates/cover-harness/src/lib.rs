//! Experiment harness: closed-form bounds, Monte Carlo verification,
//! scenario execution over the simulator, and deterministic exports.

pub mod bounds;
pub mod config;
pub mod experiments;
pub mod export;
pub mod scenario;
pub mod stats;
