//! Command implementations behind the `age-patrol` binary.
//!
//! `main.rs` only parses flags; everything here is usable from tests.

pub mod commands;
pub mod config;
pub mod error;
pub mod reproduce;
mod stats;

pub use error::{CliError, Result};
