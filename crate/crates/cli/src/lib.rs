//! Experiment runner over `minimax-core`: JSON configs, named presets, and
//! CSV/JSON reports.

pub mod app;
pub mod config;
pub mod presets;
pub mod run;

pub use config::{validate, validate_value, ExperimentConfig, ValidationError, ValidationErrors};
pub use run::{execute, run, Report, RunError};
