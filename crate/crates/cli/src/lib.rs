//! Command-line front end for the `sdi-qrng` crate.

pub mod commands;
pub mod config;
pub mod output;
