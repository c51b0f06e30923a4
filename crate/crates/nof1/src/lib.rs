//! Command-line frontend and file formats for the `nof1-core` analysis
//! library.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use error::{CliError, Result};
