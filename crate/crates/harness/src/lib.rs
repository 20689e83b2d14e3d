//! Declarative, seeded Monte Carlo experiments on top of `nfteig-core`.
//!
//! A TOML config names one experiment of the [`catalog`] and its
//! parameters; [`runner::run_experiment`] executes it and writes
//! `runs.csv`, `summary.csv`, `plot_data.csv`, `summary.json` and
//! `manifest.json`.

pub mod catalog;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentId};
pub use error::{exit, HarnessError};
pub use runner::{run_experiment, RunReport};
