//! Scenario files, canonical JSON, workspace persistence, and the CLI and
//! HTTP front ends over `navigator-core`.

pub mod api;
pub mod canonical;
pub mod cli;
pub mod error;
pub mod files;
pub mod service;
pub mod workspace;

pub use error::{AppError, Result};
