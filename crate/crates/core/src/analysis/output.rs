use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::stats::quantile;
use crate::error::{Error, Result};
use crate::simulate::{Divergence, MetricRecord, MetricsSeries, SimConfig};

pub const SERIES_HEADER: [&str; 5] = ["t", "tracking_error", "input_norm", "interp_error", "lyapunov"];
pub const SWEEP_HEADER: [&str; 4] = ["K", "q20", "q50", "q80"];

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub q20: f64,
    pub q50: f64,
    pub q80: f64,
}

/// Quantiles of a per-trial statistic at each feature count.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Builds rows from `(K, per-trial values)`, sorted by `K`.
    pub fn from_samples(mut samples: Vec<(usize, Vec<f64>)>) -> Result<Self> {
        samples.sort_by_key(|s| s.0);
        let rows = samples
            .iter()
            .map(|(k, v)| {
                Ok(SweepRow { k: *k, q20: quantile(v, 0.2)?, q50: quantile(v, 0.5)?, q80: quantile(v, 0.8)? })
            })
            .collect::<Result<Vec<_>>>()?;
        let s = Self { rows };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            if w[1].k <= w[0].k {
                return Err(Error::InvalidArgument("sweep K values must be strictly increasing".into()));
            }
        }
        for r in &self.rows {
            if !(r.q20 <= r.q50 && r.q50 <= r.q80) {
                return Err(Error::InvalidArgument(format!("sweep row K = {} has unordered quantiles", r.k)));
            }
        }
        Ok(())
    }

    /// `(K, median)` pairs for a power-law fit.
    pub fn medians(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.k as f64, r.q50)).collect()
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let found: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
    if found != header {
        return Err(Error::InvalidArgument(format!("{}: unexpected header {found:?}", path.display())));
    }
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

pub fn write_series_csv(path: &Path, series: &MetricsSeries) -> Result<()> {
    write_rows(
        path,
        &SERIES_HEADER,
        series.records.iter().map(|r| {
            [r.t, r.tracking_error, r.input_norm, r.interp_error, r.lyapunov].iter().map(|v| format_float(*v)).collect()
        }),
    )
}

pub fn read_series_csv(path: &Path) -> Result<Vec<MetricRecord>> {
    read_rows(path, &SERIES_HEADER)
}

pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<()> {
    write_rows(
        path,
        &SWEEP_HEADER,
        sweep.rows.iter().map(|r| vec![r.k.to_string(), format_float(r.q20), format_float(r.q50), format_float(r.q80)]),
    )
}

pub fn read_sweep_csv(path: &Path) -> Result<SweepResult> {
    let rows = read_rows(path, &SWEEP_HEADER)?;
    Ok(SweepResult { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub index: usize,
    pub seed: u64,
    pub csv: Option<PathBuf>,
    pub divergence: Option<Divergence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Resolved configuration plus per-trial seeds and outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: SimConfig,
    pub trials: Vec<TrialEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<(String, serde_json::Value)>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        let text = serde_json::to_string_pretty(self)?;
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
