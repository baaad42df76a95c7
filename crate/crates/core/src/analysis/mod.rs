//! Ensemble statistics, power-law fits and file output.

pub mod experiments;
pub mod output;
pub mod stats;

pub use experiments::{
    evaluate_bounds, final_metric, kernel_check, run_sweep, BoundConfig, BoundReport, KernelCheckConfig,
    KernelCheckReport, KernelCheckRow, SweepConfig, SweepMetric, SweepOutcome,
};
pub use output::{
    format_float, read_series_csv, read_sweep_csv, write_series_csv, write_sweep_csv, RunManifest, SweepResult,
    SweepRow, TrialEntry, SERIES_HEADER, SWEEP_HEADER,
};
pub use stats::{
    fit_power_law, quantile, PowerLawFit, REFERENCE_INTERPOLATION_EXPONENT, REFERENCE_PREDICTION_EXPONENT,
};
