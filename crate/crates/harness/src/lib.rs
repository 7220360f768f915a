//! Experiment runner for the RBF partition-of-unity Poisson solvers.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod report;
pub mod svg;

pub use config::ExperimentConfig;
pub use experiments::{experiment_by_name, run_point, Experiment, EXPERIMENT_NAMES};
pub use report::{Flag, Report, Row};
