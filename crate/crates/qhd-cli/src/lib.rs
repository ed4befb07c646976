//! Library surface of the command-line harness: config parsing and the
//! regime pipelines, split out so integration tests can drive them without
//! spawning the binary.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigErrors, Regime, RunConfig};
pub use run::{boost_check, ensemble, extract, run, RunOutcome};
