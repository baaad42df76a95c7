use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a run's output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub t: f64,
    /// `|x - x_d|` for control, `|x^ - x|` for prediction.
    pub tracking_error: f64,
    /// `|u|`, or the norm of the learned vector field for prediction.
    pub input_norm: f64,
    /// `|u - h(x)|`, or `|f^(x^) - f(x^)|` for prediction.
    pub interp_error: f64,
    pub lyapunov: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub t: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub seed: u64,
    pub records: Vec<MetricRecord>,
    pub divergence: Option<Divergence>,
    /// Final learned parameters (model weights or network parameters).
    pub final_params: Vec<f64>,
}

impl MetricsSeries {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    /// Records with `t` in the last `fraction` of the covered time span.
    pub fn final_window(&self, fraction: f64) -> &[MetricRecord] {
        let (Some(first), Some(last)) = (self.records.first(), self.records.last()) else {
            return &[];
        };
        let start = last.t - fraction * (last.t - first.t);
        let idx = self.records.partition_point(|r| r.t < start - 1e-12);
        &self.records[idx..]
    }

    pub fn final_window_values(&self, fraction: f64, f: impl Fn(&MetricRecord) -> f64) -> Vec<f64> {
        self.final_window(fraction).iter().map(f).collect()
    }

    /// Median tracking error over the final window.
    pub fn final_tracking_median(&self, fraction: f64) -> Result<f64> {
        crate::analysis::quantile(&self.final_window_values(fraction, |r| r.tracking_error), 0.5)
    }

    pub fn final_tracking_max(&self, fraction: f64) -> f64 {
        self.final_window(fraction).iter().map(|r| r.tracking_error).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_tracking(&self) -> f64 {
        self.records.iter().map(|r| r.tracking_error).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn initial_tracking(&self) -> Result<f64> {
        self.records.first().map(|r| r.tracking_error).ok_or_else(|| Error::InvalidArgument("empty series".into()))
    }
}
