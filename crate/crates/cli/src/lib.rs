//! Command-line front end: argument parsing, charge files and table output.

pub mod charges;
pub mod cli;
pub mod commands;
pub mod error;
pub mod output;
