//! File formats, run manifests and batch commands around `ttnprep-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod trials;

pub use error::{CliError, Result};
