//! Experiment harness: configuration, cross validation, CSV outputs and
//! significance tests.

pub mod config;
pub mod fuzz;
pub mod runner;
pub mod stats;

pub use config::{ConfigLayer, EvalMode, ExperimentConfig, Method};
pub use runner::{predict, run_experiment, RunOutput};
