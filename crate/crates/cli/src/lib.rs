//! Command-line front end for the persuasion-technique classifier.

pub mod args;
pub mod commands;
pub mod error;
pub mod predictions;
pub mod settings;

pub use args::{run, Cli};
pub use error::CliError;
pub use predictions::PredictionFile;
