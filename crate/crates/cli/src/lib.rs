//! Scenario configuration, bench presets, sweeps and CSV output for the
//! `ewave` command-line simulator.

// `!(x > 0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;

pub use config::{load_config, parse_config, ConfigError, ScenarioConfig, Setup};
pub use experiment::{emit_trace, run_experiment, ExperimentError, ExperimentOutput, Row};
