//! Command-line plumbing for `sirwave`: the staged pipeline, artifact
//! writers and subcommand bodies. The binary in `main.rs` only parses
//! arguments and maps outcomes to exit codes.

pub mod artifacts;
pub mod commands;
pub mod pipeline;
