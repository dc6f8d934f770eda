//! Config-driven runner: reads a TOML run description, computes spectra,
//! indices, spectral flows, eta invariants or identity suites, and writes JSON
//! reports and CSV tables with fixed formatting.

pub mod cache;
pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{execute, run, RunOptions, RunOutcome};
