//! Library surface of the CLI: configuration, file formats, command
//! implementations, and report rendering. The binary in `main.rs` is a thin
//! argument-parsing shell over these modules.

pub mod commands;
pub mod config;
pub mod io;
pub mod render;
pub mod report;
