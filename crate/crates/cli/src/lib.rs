//! Command-line front end for the lab: TOML configuration, subcommand
//! runners and report writing.

pub mod commands;
pub mod config;
