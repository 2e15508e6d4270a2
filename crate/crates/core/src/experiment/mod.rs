//! Experiment orchestration: configuration, single trials, sweeps, CSV
//! and SVG output.

pub mod config;
pub mod csv;
pub mod plot;
pub mod run;
pub mod sweep;

pub use config::{CalibrationMode, ExperimentConfig, Figure, Tracker};
pub use run::{run_detailed, run_experiment, trial_setup, RunDetail};
pub use sweep::{sweep, SweepOutput};
