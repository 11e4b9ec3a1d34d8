//! Command-line workflow and HTTP service for lesion risk bundles.

pub mod commands;
pub mod server;

pub use commands::{run, Cli};
