//! Command-line driver: configuration files, the `solve`, `sweep` and
//! `generr` pipelines, and the seeded verification harness.
//!
//! Exit codes: `0` success, `1` configuration or input error, `2` infeasible
//! factor, `3` generalization-error routes disagree, `4` property failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod verify;

pub use commands::{run_generr, run_solve, run_sweep};
pub use config::Config;
pub use error::CliError;
