//! Command-line front end for the crowdsourced representation-learning
//! toolkit in `rll-core`.

pub mod args;
mod commands;
pub mod config;

pub use commands::{run, THREADS_VAR};
