//! Experiment runner behind the `noiselab` binary: configs, the preset catalog,
//! report emission and determinism checks.

pub mod config;
mod error;
pub mod presets;
pub mod report;
pub mod runner;

pub use config::{config_for_target, config_from_value, load_config, ExperimentConfig};
pub use error::{CliError, Result};
pub use presets::{Outcome, Preset};
pub use runner::{run_to_dir, verify_determinism, DeterminismReport, RunManifest};
