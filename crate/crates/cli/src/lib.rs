//! Library surface of the `bdc` command-line tool: configuration handling and
//! the subcommand implementations, kept importable for integration tests.

pub mod commands;
pub mod config;
