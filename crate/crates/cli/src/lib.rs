//! Experiment driver: runs solvers, planners and learners from instance
//! files and writes CSV records, JSON summaries and SVG learning curves.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod plot;
pub mod report;

pub use config::{load_config, AgentOverride, ExperimentConfig, LearnerSettings};
pub use experiment::{run_experiment, summarize, Experiment, RunRecord, Stat, Summary};
pub use plot::{emit_plots, emit_plots_ordered};
pub use report::{emit_csv, read_csv, write_summary};
