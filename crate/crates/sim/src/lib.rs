//! Experiment orchestration for the DSFL simulator: configuration,
//! the cost-surface, solver-comparison and training-curve experiments,
//! and their CSV outputs.

pub mod config;
pub mod error;
pub mod experiments;

pub use config::Config;
pub use error::{Error, Result};
