//! Experiment configuration, Monte Carlo sweeps, the built-in experiments
//! and their CSV/manifest artifacts.

pub mod config;
pub mod named;
pub mod output;
pub mod sweep;

pub use config::{ExperimentConfig, Method};
pub use named::{run_named_experiment, NamedOutput};
pub use output::{run_experiment, Manifest};
pub use sweep::{sweep, SweepResult};
