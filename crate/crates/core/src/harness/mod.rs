//! Experiment configuration, synthetic datasets, metrics and seeded runs.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod metrics;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, write_outputs, ExperimentOutput};
pub use metrics::{error_metric, Metric, MetricRow};
