use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate applied to the Lyapunov value before it drives adaptation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
#[derive(Default)]
pub enum DeadzoneSpec {
    /// Smoothed hinge: zero up to `delta`, quadratic over `[delta, delta + 2 gamma_s]`, then linear.
    QuadraticHinge { delta: f64, gamma_s: f64 },
    /// `(sqrt(q) - sqrt(delta))^2` above `delta`.
    ShiftedSquare { delta: f64 },
    #[default]
    None,
}

impl DeadzoneSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DeadzoneSpec::QuadraticHinge { delta, gamma_s } => delta > 0.0 && gamma_s > 0.0,
            DeadzoneSpec::ShiftedSquare { delta } => delta > 0.0,
            DeadzoneSpec::None => true,
        };
        if !ok {
            return Err(Error::Config(format!("deadzone parameters must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        match *self {
            DeadzoneSpec::QuadraticHinge { delta, .. } | DeadzoneSpec::ShiftedSquare { delta } => delta,
            DeadzoneSpec::None => 0.0,
        }
    }

    /// Lipschitz constant of the slope, where it has one.
    pub fn slope_lipschitz(&self) -> Option<f64> {
        match *self {
            DeadzoneSpec::QuadraticHinge { gamma_s, .. } => Some(1.0 / (2.0 * gamma_s)),
            DeadzoneSpec::None => Some(0.0),
            DeadzoneSpec::ShiftedSquare { .. } => None,
        }
    }

    pub fn value(&self, q: f64) -> Result<f64> {
        check_q(q)?;
        Ok(self.value_unchecked(q))
    }

    pub fn slope(&self, q: f64) -> Result<f64> {
        check_q(q)?;
        Ok(self.slope_unchecked(q))
    }

    #[inline]
    pub fn value_unchecked(&self, q: f64) -> f64 {
        match *self {
            DeadzoneSpec::QuadraticHinge { delta, gamma_s } => {
                if q <= delta {
                    0.0
                } else if q < delta + 2.0 * gamma_s {
                    (q - delta).powi(2) / (4.0 * gamma_s)
                } else {
                    q - (delta + gamma_s)
                }
            }
            DeadzoneSpec::ShiftedSquare { delta } => {
                if q <= delta {
                    0.0
                } else {
                    (q.sqrt() - delta.sqrt()).powi(2)
                }
            }
            DeadzoneSpec::None => q,
        }
    }

    #[inline]
    pub fn slope_unchecked(&self, q: f64) -> f64 {
        match *self {
            DeadzoneSpec::QuadraticHinge { delta, gamma_s } => {
                if q <= delta {
                    0.0
                } else if q < delta + 2.0 * gamma_s {
                    (q - delta) / (2.0 * gamma_s)
                } else {
                    1.0
                }
            }
            DeadzoneSpec::ShiftedSquare { delta } => {
                if q <= delta {
                    0.0
                } else {
                    1.0 - (delta / q).sqrt()
                }
            }
            DeadzoneSpec::None => 1.0,
        }
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 0.0) {
        return Err(Error::InvalidArgument(format!("deadzone argument must be nonnegative, got {q}")));
    }
    Ok(())
}

pub fn deadzone_value(spec: &DeadzoneSpec, q: f64) -> Result<f64> {
    spec.value(q)
}

pub fn deadzone_slope(spec: &DeadzoneSpec, q: f64) -> Result<f64> {
    spec.slope(q)
}
