//! Experiment driver: sampling, seed sweeps, evaluation and persistence.

mod config;
mod record;
mod suite;

pub use config::{ExperimentConfig, GaussianMixture, MixtureComponent, TargetKind};
pub use record::{RunRecord, RECORD_FORMAT};
pub use suite::{
    evaluate_final, network_for, record_path, run_single, run_suite, summarize, theta0_for,
    Evaluation, RunFailure, Summary, SummaryRow, SUMMARY_HEADER,
};
