//! Batch CLI and HTTP API around `paci-core`.

pub mod cli;
pub mod data;
pub mod error;
pub mod manifest;
pub mod server;
pub mod svg;

pub use cli::{run, Cli};
pub use error::{AppError, AppResult};
