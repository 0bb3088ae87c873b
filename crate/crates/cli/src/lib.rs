//! Command-line driver: TOML experiment configs, run directories and reports.

pub mod config;
pub mod error;
pub mod report;
pub mod tasks;
