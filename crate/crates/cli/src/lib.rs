//! Configuration-driven campaigns on top of `mfal-core`.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{ExternalConfig, RunConfig};
pub use runner::{report, run, run_repetition, RunOptions};
