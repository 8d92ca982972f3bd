//! Command-line front end: configuration, experiment dispatch and output.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;
pub mod units;

pub use cli::{run, Cli};
pub use config::RunConfig;
