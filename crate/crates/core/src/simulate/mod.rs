//! Fixed-step closed-loop simulation and metric collection.

pub mod config;
pub mod metrics;
pub mod run;

pub use config::{trial_seed, AdaptationConfig, LawKind, NBodyOptions, SimConfig, SystemKind};
pub use metrics::{Divergence, MetricRecord, MetricsSeries};
pub use run::{
    run_control, run_control_observed, run_prediction, run_sampling, run_single, run_trials, step_euler, SamplingRun,
    DIVERGENCE_NORM,
};
