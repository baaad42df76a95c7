use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Potential whose gradient gives the dual coordinates of a parameter block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
#[derive(Default)]
pub enum MirrorMap {
    #[default]
    Euclidean,
    /// `grad psi(a)_i = asinh(a_i / beta)`.
    Hypentropy { beta: f64 },
}

impl MirrorMap {
    pub fn validate(&self) -> Result<()> {
        if let MirrorMap::Hypentropy { beta } = *self {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::Config(format!("hypentropy beta must be positive, got {beta}")));
            }
        }
        Ok(())
    }

    /// Primal to dual, `grad psi`.
    pub fn to_dual(&self, primal: &[f64]) -> Vec<f64> {
        match *self {
            MirrorMap::Euclidean => primal.to_vec(),
            MirrorMap::Hypentropy { beta } => primal.iter().map(|a| (a / beta).asinh()).collect(),
        }
    }

    /// Dual to primal, the inverse of [`MirrorMap::to_dual`].
    pub fn to_primal_into(&self, dual: &[f64], out: &mut [f64]) -> Result<()> {
        match *self {
            MirrorMap::Euclidean => out.copy_from_slice(dual),
            MirrorMap::Hypentropy { beta } => {
                for (index, (o, &v)) in out.iter_mut().zip(dual).enumerate() {
                    let a = beta * v.sinh();
                    if !a.is_finite() {
                        return Err(Error::Saturation { index, value: v });
                    }
                    *o = a;
                }
            }
        }
        Ok(())
    }

    pub fn to_primal(&self, dual: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; dual.len()];
        self.to_primal_into(dual, &mut out)?;
        Ok(out)
    }
}

pub fn mirror_primal(map: &MirrorMap, dual: &[f64]) -> Result<Vec<f64>> {
    map.to_primal(dual)
}
