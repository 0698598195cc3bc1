//! Library surface of the experiment runner, used by the binary and by the
//! acceptance suite.

pub mod config;
pub mod experiments;

pub use config::{load, ExperimentConfig, ExperimentKind};
pub use experiments::{run, validate, RunError, RunOutcome};
