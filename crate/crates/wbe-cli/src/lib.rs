//! Library half of the `wbe` pipeline tool; `main.rs` only parses arguments
//! and maps errors to exit codes.

pub mod config;
pub mod csv_io;
pub mod error;
pub mod logger;
pub mod pipeline;
pub mod report;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
