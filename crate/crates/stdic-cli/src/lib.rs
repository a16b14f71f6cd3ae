//! Library side of the `stdic` command-line tool: the experiment
//! configuration schema and the synth/analyze/metrics pipeline drivers.
//! The binary is a thin argument-parsing wrapper so integration tests can
//! drive the exact same code paths in process.

pub mod config;
pub mod pipeline;

pub use config::ExperimentConfig;
pub use pipeline::{run_analyze, run_metrics, run_reproduce, run_synth, RunOptions};
