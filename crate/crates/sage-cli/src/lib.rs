//! Library behind the `sage` binary. Every subcommand is a deterministic
//! function of its config file and seed: a rerun with an identical
//! `manifest.json` reproduces every output byte for byte.

pub mod commands;
pub mod error;
pub mod experiments;
pub mod manifest;

pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
