//! Multi-run drivers shared by the command-line tool and the test suites.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::output::SweepResult;
use super::stats::{fit_power_law, quantile, PowerLawFit};
use crate::error::{Error, Result};
use crate::kernel_rf::{approximation_bound, required_features, BoundInputs, KernelConfig};
use crate::simulate::{run_trials, MetricsSeries, SimConfig};

/// Which error a K-sweep aggregates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMetric {
    /// `|x - x_d|` for control, `|xhat - x|` for prediction.
    #[default]
    Tracking,
    /// Distance between the learned and true fields.
    Interpolation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Feature counts, strictly increasing.
    #[serde(rename = "K")]
    pub ks: Vec<usize>,
    #[serde(default)]
    pub metric: SweepMetric,
    /// Run template; its `kernel.K` is replaced per sweep point.
    pub base: SimConfig,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks[0] == 0 {
            return Err(Error::Config("sweep needs at least one positive K".into()));
        }
        if self.ks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep K values must be strictly increasing".into()));
        }
        if self.base.kernel.is_none() {
            return Err(Error::Config("sweep base needs a kernel section".into()));
        }
        self.base.validate()
    }

    /// The base config with `K` features.
    pub fn point(&self, k: usize) -> SimConfig {
        let mut c = self.base.clone();
        if let Some(kc) = c.kernel.as_mut() {
            kc.k = k;
        }
        c
    }
}

/// Per-K trial results plus the aggregated sweep.
#[derive(Debug)]
pub struct SweepOutcome {
    pub sweep: SweepResult,
    /// `None` with fewer than three sweep points.
    pub fit: Option<PowerLawFit>,
    pub runs: Vec<(usize, Vec<Result<MetricsSeries>>)>,
}

impl SweepOutcome {
    pub fn any_diverged(&self) -> bool {
        self.runs.iter().flat_map(|(_, r)| r).any(|r| matches!(r, Ok(s) if s.diverged()))
    }
}

/// Final-window median of the chosen metric for one run.
pub fn final_metric(series: &MetricsSeries, frac: f64, metric: SweepMetric) -> Result<f64> {
    let v = match metric {
        SweepMetric::Tracking => series.final_window_values(frac, |m| m.tracking_error),
        SweepMetric::Interpolation => series.final_window_values(frac, |m| m.interp_error),
    };
    quantile(&v, 0.5)
}

/// Runs every sweep point. Failed or diverged trials are left out of the
/// quantiles; a point with no usable trial is an error.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let mut runs = Vec::with_capacity(cfg.ks.len());
    let mut samples = Vec::with_capacity(cfg.ks.len());
    for &k in &cfg.ks {
        let point = cfg.point(k);
        let trials = run_trials(&point)?;
        let vals = trials
            .iter()
            .filter_map(|r| r.as_ref().ok().filter(|s| !s.diverged()))
            .map(|s| final_metric(s, point.final_window, cfg.metric))
            .collect::<Result<Vec<_>>>()?;
        if vals.is_empty() {
            return Err(Error::InvalidArgument(format!("no usable trial at K = {k}")));
        }
        samples.push((k, vals));
        runs.push((k, trials));
    }
    let sweep = SweepResult::from_samples(samples)?;
    let fit = if sweep.rows.len() >= 3 { Some(fit_power_law(&sweep.medians())?) } else { None };
    Ok(SweepOutcome { sweep, fit, runs })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckConfig {
    pub kernel: KernelConfig,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Points are drawn uniformly from `[-radius, radius]^n`.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Largest acceptable `|estimate - exact| / stderr`.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_pairs() -> usize {
    10
}
fn default_radius() -> f64 {
    1.0
}
fn default_threshold() -> f64 {
    3.0
}

impl KernelCheckConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::Config("pairs must be at least 1".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::Config(format!("threshold must be positive, got {}", self.threshold)));
        }
        let spec = self.kernel.to_spec()?;
        if !spec.is_translation_invariant() {
            return Err(Error::Config("kernel check needs a random-feature kernel".into()));
        }
        Ok(())
    }
}

/// One matrix entry of one point pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCheckRow {
    pub pair: usize,
    pub row: usize,
    pub col: usize,
    pub estimate: f64,
    pub exact: f64,
    pub stderr: f64,
    /// `|estimate - exact| / stderr`; zero-variance entries must match to `1e-12`.
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCheckReport {
    pub rows: Vec<KernelCheckRow>,
    pub max_z: f64,
    pub threshold: f64,
}

impl KernelCheckReport {
    pub fn passed(&self) -> bool {
        self.max_z <= self.threshold
    }
}

/// Compares the feature-bank average `(1/K) Psi(x) Psi(y)^T` with the
/// closed-form kernel at random point pairs. `seed` draws the bank and,
/// on a separate stream, the points.
pub fn kernel_check(cfg: &KernelCheckConfig, seed: u64) -> Result<KernelCheckReport> {
    cfg.validate()?;
    let mut kc = cfg.kernel.clone();
    kc.seed = seed;
    let bank = kc.build_bank()?;
    let spec = kc.to_spec()?;
    let n = bank.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut rows = Vec::new();
    for pair in 0..cfg.pairs {
        let mut draw = || (0..n).map(|_| rng.random_range(-cfg.radius..=cfg.radius)).collect::<Vec<_>>();
        let (x, y) = (draw(), draw());
        let exact = spec.eval(&x, &y)?;
        let (mean, stderr) = bank.kernel_estimate(&x, &y)?;
        for row in 0..exact.nrows() {
            for col in 0..exact.ncols() {
                let (est, ex, se) = (mean[(row, col)], exact[(row, col)], stderr[(row, col)]);
                let diff = (est - ex).abs();
                let z = if se > 0.0 {
                    diff / se
                } else if diff <= 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                };
                rows.push(KernelCheckRow { pair, row, col, estimate: est, exact: ex, stderr: se, z });
            }
        }
    }
    let max_z = rows.iter().map(|r| r.z).fold(0.0, f64::max);
    Ok(KernelCheckReport { rows, max_z, threshold: cfg.threshold })
}

/// Inputs to the feature-count calculator. With a `kernel`, the
/// feature-dependent constants are filled in from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    #[serde(default)]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub inputs: BoundInputs,
    /// Target accuracies for the required-K calculation.
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Feature counts for the achievable-accuracy calculation.
    #[serde(default, rename = "K")]
    pub ks: Vec<u64>,
}

impl BoundConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolved_inputs()?;
        if cfg.eps.is_empty() && cfg.ks.is_empty() {
            return Err(Error::Config("bound config needs eps or K values".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn resolved_inputs(&self) -> Result<BoundInputs> {
        let inputs = match &self.kernel {
            Some(k) => self.inputs.clone().with_kernel(&k.to_spec()?)?,
            None => self.inputs.clone(),
        };
        inputs.validate()?;
        Ok(inputs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    /// `(eps, K)`
    pub required: Vec<(f64, u64)>,
    /// `(K, eps)`
    pub achievable: Vec<(u64, f64)>,
}

pub fn evaluate_bounds(cfg: &BoundConfig) -> Result<BoundReport> {
    let inputs = cfg.resolved_inputs()?;
    let required = cfg.eps.iter().map(|&e| Ok((e, required_features(&inputs, e)?))).collect::<Result<_>>()?;
    let achievable = cfg.ks.iter().map(|&k| Ok((k, approximation_bound(&inputs, k)?))).collect::<Result<_>>()?;
    Ok(BoundReport { inputs, required, achievable })
}
