//! Experiment harness for the Walksat laboratory: density sweeps, drift and
//! bound monitoring, deterministic replays, and the lazy-generation
//! equivalence test, all reproducible from (configuration, seed).

pub mod commands;
pub mod config;
pub mod experiments;
pub mod stats;

pub use config::HarnessError;
