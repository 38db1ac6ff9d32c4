//! Simulation, validation and command-line tooling around `excursion-core`.
//!
//! * [`simulate`] draws stationary Gaussian fields on grids by circulant
//!   embedding.
//! * [`config`] reads TOML experiment descriptions.
//! * [`harness`] predicts, validates and tabulates.

pub mod config;
pub mod harness;
pub mod simulate;

pub use config::{ConfigError, ExperimentConfig};
pub use harness::{density_report, predict, run_validation, HarnessError, ValidationReport};
pub use simulate::{simulate, CirculantEmbedding, FieldSample, GridSpec, SimulationError};
