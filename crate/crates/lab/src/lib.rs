//! Experiment runner and command-line front end for `enif`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod runner;

pub use config::ExperimentConfig;
pub use error::{LabError, LabResult};
pub use runner::run_config;
