//! Experiment plumbing for the `nmmc` binary: configuration files, dataset
//! preparation and the subcommands.

pub mod commands;
pub mod config;
