//! Configuration-driven experiments on top of `otfs-core`: BER sweeps,
//! capacity and power tables, CIR and matrix dumps, equivalence checks.

pub mod config;
pub mod equivalence;
pub mod error;
pub mod experiments;
pub mod output;
pub mod seed;
pub mod sim;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{CliError, Result};
pub use seed::trial_seed;
