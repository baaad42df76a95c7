use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::adaptation::{AdaptState, DeadzoneSpec};
use crate::error::{check_dim, Error, Result};
use crate::kernel_rf::LinearFeatures;

/// Known-physics regressor `Y(x, t)`, `d x p`.
pub type Regressor = Arc<dyn Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync>;

/// Adaptive predictor `x^' = Y(x^, t) a_p + Psi(x^) a_m - zeta (x^ - x(t))`
/// under the constant metric `c I`, where `Q = c |x^ - x|^2` and geodesics
/// are straight lines.
#[derive(Clone)]
pub struct Predictor {
    pub zeta: f64,
    pub metric_scale: f64,
    /// Learning rate multiplying both dual rates.
    pub gamma: f64,
    pub deadzone: DeadzoneSpec,
    model: Arc<dyn LinearFeatures>,
    regressor: Option<(Regressor, usize)>,
}

impl std::fmt::Debug for Predictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Predictor")
            .field("zeta", &self.zeta)
            .field("metric_scale", &self.metric_scale)
            .field("gamma", &self.gamma)
            .field("deadzone", &self.deadzone)
            .field("feature_dim", &self.model.feature_dim())
            .finish()
    }
}

pub fn build_predictor(model: Arc<dyn LinearFeatures>, zeta: f64) -> Result<Predictor> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::Config(format!("feedback gain zeta must be positive, got {zeta}")));
    }
    if model.input_dim() != model.output_dim() {
        return Err(Error::Config("predictor features must map R^n to R^n".into()));
    }
    Ok(Predictor { zeta, metric_scale: 1.0, gamma: 1.0, deadzone: DeadzoneSpec::None, model, regressor: None })
}

impl Predictor {
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn with_deadzone(mut self, deadzone: DeadzoneSpec) -> Result<Self> {
        deadzone.validate()?;
        self.deadzone = deadzone;
        Ok(self)
    }

    pub fn with_metric_scale(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Config(format!("metric scale must be positive, got {c}")));
        }
        self.metric_scale = c;
        Ok(self)
    }

    /// Adds a known regressor with `p` physical parameters.
    pub fn with_regressor(mut self, y: Regressor, p: usize) -> Self {
        self.regressor = Some((y, p));
        self
    }

    pub fn n(&self) -> usize {
        self.model.input_dim()
    }
    pub fn model_dim(&self) -> usize {
        self.model.feature_dim()
    }
    pub fn physical_dim(&self) -> usize {
        self.regressor.as_ref().map_or(0, |r| r.1)
    }

    /// Lower bound `mu` of the metric, `mu I <= M`.
    pub fn mu(&self) -> f64 {
        self.metric_scale
    }

    pub fn energy(&self, xhat: &[f64], x: &[f64]) -> f64 {
        self.metric_scale * xhat.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }

    /// Learned vector field `Y a_p + Psi a_m` at `xhat`.
    pub fn model_field(&self, state: &AdaptState, xhat: &[f64], t: f64, out: &mut [f64]) {
        self.model.apply(xhat, state.alpha_m(), out);
        if let Some((y, _)) = &self.regressor {
            let ya = y(xhat, t) * nalgebra::DVector::from_column_slice(state.alpha_p());
            out.iter_mut().zip(ya.iter()).for_each(|(o, v)| *o += v);
        }
    }

    /// Writes the estimate derivative and both dual rates.
    pub fn rhs_into(
        &self,
        state: &AdaptState,
        xhat: &[f64],
        x: &[f64],
        t: f64,
        xhat_dot: &mut [f64],
        rate_p: &mut [f64],
        rate_m: &mut [f64],
    ) -> Result<()> {
        let n = self.n();
        check_dim("estimate", n, xhat.len())?;
        check_dim("measurement", n, x.len())?;
        check_dim("model weights", self.model_dim(), state.alpha_m().len())?;
        check_dim("physical weights", self.physical_dim(), state.alpha_p().len())?;
        self.model_field(state, xhat, t, xhat_dot);
        for i in 0..n {
            xhat_dot[i] -= self.zeta * (xhat[i] - x[i]);
        }
        let slope = self.deadzone.slope(self.energy(xhat, x))?;
        if slope == 0.0 {
            rate_p.fill(0.0);
            rate_m.fill(0.0);
            return Ok(());
        }
        // gradQ = 2c (xhat - x)
        let scale = -self.gamma * slope * 2.0 * self.metric_scale;
        let v: Vec<f64> = xhat.iter().zip(x).map(|(a, b)| scale * (a - b)).collect();
        self.model.apply_transpose(xhat, &v, rate_m);
        if let Some((y, _)) = &self.regressor {
            let r = y(xhat, t).transpose() * nalgebra::DVector::from_column_slice(&v);
            rate_p.copy_from_slice(r.as_slice());
        }
        Ok(())
    }
}

/// Discrete-sampling predictor: open-loop flow between measurements and the
/// contraction update `k(y, x) = x + sqrt(beta) (y - x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretePredictorSpec {
    pub beta: f64,
}

impl DiscretePredictorSpec {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1), got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn update(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        let s = self.beta.sqrt();
        y.iter().zip(x).map(|(y, x)| x + s * (y - x)).collect()
    }
}

/// Result of one measurement interval.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingStep {
    pub xhat: Vec<f64>,
    /// `|x^_i - x_i|^2`
    pub energy_before: f64,
    /// `|x^_{i+1} - x_{i+1}|^2`
    pub energy_after: f64,
}

/// Flows `xhat_i` open loop for `dt`, then applies the measurement update
/// against `x_next`. `x_i` is only used for the pre-step energy.
pub fn discrete_sampling_step(
    spec: &DiscretePredictorSpec,
    xhat: &[f64],
    x: &[f64],
    x_next: &[f64],
    flow: impl FnOnce(&[f64], f64) -> Vec<f64>,
    dt: f64,
) -> Result<SamplingStep> {
    check_dim("measurement", xhat.len(), x.len())?;
    check_dim("next measurement", xhat.len(), x_next.len())?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {dt}")));
    }
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let half = flow(xhat, dt);
    check_dim("flow output", xhat.len(), half.len())?;
    let next = spec.update(&half, x_next);
    Ok(SamplingStep { energy_before: sq(xhat, x), energy_after: sq(&next, x_next), xhat: next })
}

/// `exp(A t)` by scaling and squaring of a Taylor series.
pub fn matrix_exp(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let m = a * t;
    let norm = m.abs().row_sum().max();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let m = m / 2f64.powi(squarings as i32);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &m / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_rf::FiniteFeatureMap;

    #[test]
    fn nonpositive_zeta_is_rejected() {
        let map = Arc::new(FiniteFeatureMap::builtin("linear", 1).unwrap());
        assert!(build_predictor(map.clone(), 0.0).unwrap_err().is_config());
        assert!(build_predictor(map, -1.0).is_err());
    }

    #[test]
    fn zero_error_zero_feedback() {
        let map = Arc::new(FiniteFeatureMap::builtin("linear", 2).unwrap());
        let p = build_predictor(map, 3.0).unwrap();
        let st = AdaptState::new(&[], &[0.5, -1.0], Default::default(), Default::default()).unwrap();
        let x = [0.3, 0.7];
        let (mut f, mut rp, mut rm) = (vec![0.0; 2], vec![], vec![9.0; 2]);
        p.rhs_into(&st, &x, &x, 0.0, &mut f, &mut rp, &mut rm).unwrap();
        assert_eq!(f, vec![0.15, -0.7]);
        assert_eq!(rm, vec![0.0, 0.0]);
    }

    #[test]
    fn constant_metric_energy() {
        let map = Arc::new(FiniteFeatureMap::builtin("linear", 3).unwrap());
        let p = build_predictor(map, 1.0).unwrap().with_metric_scale(2.5).unwrap();
        let e = p.energy(&[1.0, 2.0, 3.0], &[0.0, 2.0, 1.0]);
        assert_eq!(e, 2.5 * 5.0);
    }

    #[test]
    fn sampling_update_closed_forms() {
        let spec = DiscretePredictorSpec::new(0.25).unwrap();
        let x = [1.0, -2.0];
        assert_eq!(spec.update(&x, &x), x.to_vec());
        let v = [0.4, -0.3];
        let y: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + b).collect();
        let step = discrete_sampling_step(&spec, &y, &x, &x, |s, _| s.to_vec(), 0.1).unwrap();
        assert!((step.energy_after - 0.25 * 0.25).abs() < 1e-15);
        assert!(DiscretePredictorSpec::new(1.0).is_err());
        assert!(DiscretePredictorSpec::new(0.0).is_err());
    }

    #[test]
    fn matrix_exponential() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let e = matrix_exp(&a, 1.3);
        let (s, c) = 1.3f64.sin_cos();
        let expect = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        assert!((e - expect).amax() < 1e-13);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-2.0, 0.5]));
        let e = matrix_exp(&d, 3.0);
        assert!((e[(0, 0)] - (-6.0f64).exp()).abs() < 1e-15);
        assert!((e[(1, 1)] / 1.5f64.exp() - 1.0).abs() < 1e-13);
    }
}
