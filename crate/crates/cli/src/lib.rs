//! The `longhorizon` command-line pipeline: configuration, artifact output
//! and the stage functions behind each subcommand.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use artifacts::RunManifest;
pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use pipeline::run_pipeline;
