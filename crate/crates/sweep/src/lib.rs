//! Deterministic parameter sweeps over randomly kicked circle maps.
//!
//! A [`SweepConfig`] expands into `(a, L)` cells. Each cell is a pure
//! function of the configuration and its index, which is also its noise
//! stream id, so output files do not depend on the number of workers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

pub use config::{validate_config, AGrid, Cell, EpsRule, EstimatorSettings, SweepConfig, Validation};
pub use run::{run_cell, run_sweep, ResultRecord, SweepReport};

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] kickmap_core::Error),
}

impl From<std::io::Error> for SweepError {
    fn from(e: std::io::Error) -> Self {
        SweepError::Io(e.to_string())
    }
}

impl From<csv::Error> for SweepError {
    fn from(e: csv::Error) -> Self {
        SweepError::Io(e.to_string())
    }
}
