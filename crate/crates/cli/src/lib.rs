//! Library side of the command-line front end: artifact formats,
//! argument parsing helpers, and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod formats;
