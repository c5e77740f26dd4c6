//! File formats, configuration, the per-symbol online pipeline, charts and
//! the command-line runner built on `ctrnn-core`.

pub mod chart;
pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod parallel;
pub mod pipeline;
pub mod synthetic;

pub use config::RunnerConfig;
pub use error::{AppError, Result};
