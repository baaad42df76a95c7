use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Linear-interpolation quantile: `h = q (N - 1)` on the sorted values.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("quantile of an empty sequence".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile level {q} outside [0, 1]")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("quantile input contains NaN".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        return Ok(v[lo]);
    }
    Ok(v[lo] + frac * (v[hi] - v[lo]))
}

/// `error ~ amplitude * K^(-exponent)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    /// Half-width of the 95% interval on the exponent: slope standard error
    /// times the two-sided Student-t quantile with `N - 2` degrees of freedom.
    pub ci95: f64,
}

impl PowerLawFit {
    /// Whether the 95% interval excludes zero.
    pub fn significant(&self) -> bool {
        self.exponent.abs() > self.ci95
    }
}

/// Reference exponents reported for the 60-dimensional prediction sweep;
/// kept for comparison only.
pub const REFERENCE_PREDICTION_EXPONENT: (f64, f64) = (1.28, 0.03);
pub const REFERENCE_INTERPOLATION_EXPONENT: (f64, f64) = (0.77, 0.03);

/// Ordinary least squares of `ln(error)` on `ln(K)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!("power-law fit needs at least 3 points, got {}", points.len())));
    }
    for &(k, e) in points {
        if !(k > 0.0 && k.is_finite()) || !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidArgument(format!("power-law fit needs positive finite data, got ({k}, {e})")));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidArgument("power-law fit needs at least two distinct K".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = n - 2.0;
    let se = (ssr / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::InvalidArgument(e.to_string()))?.inverse_cdf(0.975);
    Ok(PowerLawFit { exponent: -slope, amplitude: intercept.exp(), ci95: t * se })
}
