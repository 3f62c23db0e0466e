//! Command-line driver: run configurations, scenario runners and manifests.

pub mod args;
pub mod commands;
pub mod config;
