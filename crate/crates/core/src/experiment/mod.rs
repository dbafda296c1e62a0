//! Configuration, multi-run orchestration, statistics and plots.

pub mod config;
pub mod plot;
pub mod runner;
pub mod stats;

pub use config::{parse_config, resolve, ConfigError, ExperimentConfig, PartialConfig, PRESETS, REPRESENTATIVE_SUBSET};
pub use plot::emit_plots;
pub use runner::{run_experiment, GenerationIndicators, RunOutcome, RunPlan};
pub use stats::{friedman_compare, friedman_test, ComparisonReport, FriedmanResult, StatsError};
