use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use super::kernel::{KernelVariant, OperatorKernelSpec};
use crate::error::{Error, Result};

/// High-probability bound `B_Phi(delta)` on the operator norm of one feature block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureNormBound {
    /// Block norm does not depend on the draw (decomposable kernels).
    Constant { value: f64 },
    /// `scale * (sqrt(n) + 2 sigma_w sqrt(log(1/delta)))`.
    Gaussian { n: usize, sigma_w: f64, scale: f64 },
}

impl FeatureNormBound {
    pub fn eval(&self, delta: f64) -> f64 {
        match *self {
            FeatureNormBound::Constant { value } => value,
            FeatureNormBound::Gaussian { n, sigma_w, scale } => {
                scale * ((n as f64).sqrt() + 2.0 * sigma_w * (1.0 / delta).ln().sqrt())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundInputs {
    /// Bound on the density of the target in the feature representation.
    pub b_h: f64,
    /// Radius of the approximation domain.
    pub b_x: f64,
    pub n: usize,
    pub d1: usize,
    /// Failure probability.
    pub delta: f64,
    pub b_phi: FeatureNormBound,
    /// `E |M(w)|^2`
    pub second_moment_m: f64,
    /// `E |w|^2`
    pub second_moment_w: f64,
    pub beta: f64,
    pub lipschitz: f64,
    pub mu: f64,
    pub b_ge: f64,
    pub b_grad_q: f64,
    /// Constant `C(h, delta)`.
    pub c_h: f64,
}

impl BoundInputs {
    /// All scalar constants set to one, with the given dimensions.
    pub fn unit(n: usize, d1: usize) -> Self {
        Self {
            b_h: 1.0,
            b_x: 1.0,
            n,
            d1,
            delta: 0.5,
            b_phi: FeatureNormBound::Constant { value: 1.0 },
            second_moment_m: 1.0,
            second_moment_w: 1.0,
            beta: 1.0,
            lipschitz: 1.0,
            mu: 1.0,
            b_ge: 1.0,
            b_grad_q: 1.0,
            c_h: 1.0,
        }
    }

    /// Fills the feature-dependent fields from a Gaussian kernel, using the
    /// `sqrt(2)`-scaled blocks produced by `FeatureBank`.
    pub fn with_kernel(mut self, spec: &OperatorKernelSpec) -> Result<Self> {
        let n = spec.n();
        let sw = spec.base.spectral_scale();
        let ew2 = n as f64 * sw * sw;
        self.n = n;
        self.d1 = spec.d1();
        self.second_moment_w = ew2;
        match &spec.variant {
            KernelVariant::Decomposable { b, .. } => {
                let op = b.clone().singular_values().max();
                self.b_phi = FeatureNormBound::Constant { value: SQRT_2 * op };
                self.second_moment_m = 2.0 * op * op;
            }
            KernelVariant::CurlFree | KernelVariant::DivergenceFree | KernelVariant::Symplectic { .. } => {
                self.b_phi = FeatureNormBound::Gaussian { n, sigma_w: sw, scale: SQRT_2 };
                self.second_moment_m = 2.0 * ew2;
            }
            KernelVariant::FiniteFeature(_) => {
                return Err(Error::Unsupported("bounds need a random-feature kernel".into()))
            }
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d1 == 0 {
            return Err(Error::InvalidArgument("n and d1 must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        let named = [
            ("b_h", self.b_h),
            ("b_x", self.b_x),
            ("second_moment_m", self.second_moment_m),
            ("second_moment_w", self.second_moment_w),
            ("beta", self.beta),
            ("lipschitz", self.lipschitz),
            ("mu", self.mu),
            ("b_ge", self.b_ge),
            ("b_grad_q", self.b_grad_q),
            ("c_h", self.c_h),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self::unit(1, 1)
    }
}

// Guards ceil against values like 3600.0000000000005.
fn ceil_tolerant(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        r
    } else {
        v.ceil()
    }
}

/// Smallest `K` for which the random-feature controller reaches accuracy `eps`.
pub fn required_features(inputs: &BoundInputs, eps: f64) -> Result<u64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    inputs.validate()?;
    let raw = required_features_real(inputs, eps);
    Ok(ceil_tolerant(raw).max(1.0) as u64)
}

/// The real-valued bound before the integer ceiling.
pub fn required_features_real(inputs: &BoundInputs, eps: f64) -> f64 {
    let i = inputs;
    let ratio = i.lipschitz / i.mu;
    let geom = i.b_x * (i.n as f64).sqrt() + (i.d1 as f64).sqrt();
    4.0 / (i.beta * i.beta * eps * eps)
        * ratio
        * ratio
        * i.b_ge.powi(2)
        * i.b_grad_q.powi(2)
        * i.c_h.powi(2)
        * geom
        * geom
}

/// Uniform approximation error achievable with `K` features, with probability `1 - delta`.
pub fn approximation_bound(inputs: &BoundInputs, k: u64) -> Result<f64> {
    inputs.validate()?;
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let i = inputs;
    let kf = k as f64;
    let bphi = i.b_phi.eval(i.delta / (2.0 * kf));
    let inner = 2.0 * i.b_x * i.second_moment_w.sqrt() + 2.0 * (i.d1 as f64).sqrt() + (2.0 / i.delta).ln().sqrt();
    let tail = (0.5 * i.delta * i.second_moment_m).sqrt();
    Ok(i.b_h / kf.sqrt() * (2.0 * bphi * inner + tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_rf::kernel::ScalarKernelSpec;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn feature_count_examples() {
        let mut inp = BoundInputs::unit(4, 1);
        assert_eq!(required_features(&inp, 0.1).unwrap(), 3600);
        let full = required_features_real(&inp, 0.1);
        let half = required_features_real(&inp, 0.05);
        assert!((half / full - 4.0).abs() < 1e-12);
        assert!(required_features(&inp, 0.0).is_err());
        assert!(required_features(&inp, -1.0).is_err());
        inp.n = 0;
        assert!(required_features(&inp, 1.0).is_err());
    }

    // Written out term by term, separately from the library expression.
    fn bound_by_hand(b_h: f64, bphi: f64, b_x: f64, ew2: f64, d1: f64, delta: f64, em2: f64, k: f64) -> f64 {
        let t1 = 2.0 * b_x * ew2.sqrt();
        let t2 = 2.0 * d1.sqrt();
        let t3 = (2.0 / delta).ln().sqrt();
        let bracket = 2.0 * bphi * (t1 + t2 + t3) + (delta / 2.0 * em2).sqrt();
        b_h * bracket / k.sqrt()
    }

    #[test]
    fn unit_instance() {
        let inp = BoundInputs::unit(1, 1);
        let v = approximation_bound(&inp, 1).unwrap();
        let expect = bound_by_hand(1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 1.0, 1.0);
        assert!((v - expect).abs() < 1e-12);
        // 2 (4 + sqrt(ln 4)) + 1/2
        assert!((v - 10.854_820).abs() < 1e-6);
    }

    #[test]
    fn delta_out_of_range() {
        let mut inp = BoundInputs::unit(2, 1);
        inp.delta = 1.0;
        assert!(approximation_bound(&inp, 10).is_err());
        inp.delta = 0.0;
        assert!(approximation_bound(&inp, 10).is_err());
        assert!(approximation_bound(&BoundInputs::unit(2, 1), 0).is_err());
    }

    #[test]
    fn decomposable_scaling() {
        let base = ScalarKernelSpec::new(0.3).unwrap();
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let spec = crate::kernel_rf::OperatorKernelSpec::decomposable(base, 2, b).unwrap();
        let inp = BoundInputs::unit(2, 2).with_kernel(&spec).unwrap();
        assert_eq!(inp.b_phi, FeatureNormBound::Constant { value: SQRT_2 * 2.0 });
        let a = approximation_bound(&inp, 100).unwrap();
        let b4 = approximation_bound(&inp, 400).unwrap();
        assert!((a / b4 - 2.0).abs() < 1e-12);
        // linear in the factor norm at fixed everything else
        let mut scaled = inp.clone();
        scaled.b_phi = FeatureNormBound::Constant { value: SQRT_2 * 4.0 };
        scaled.second_moment_m *= 4.0;
        let r = approximation_bound(&scaled, 100).unwrap() / a;
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_norm_bound() {
        let g = FeatureNormBound::Gaussian { n: 4, sigma_w: 1.0, scale: 1.0 };
        assert!((g.eval((-1.0f64).exp()) - 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bound_decreases_in_k(k in 1u64..100_000, bh in 0.1f64..10.0) {
            let mut inp = BoundInputs::unit(3, 2);
            inp.b_h = bh;
            inp.b_phi = FeatureNormBound::Constant { value: 1.7 };
            prop_assert!(approximation_bound(&inp, k + 1).unwrap() < approximation_bound(&inp, k).unwrap());
        }

        #[test]
        fn gaussian_bound_decreases_in_k(k in 1u64..100_000) {
            let mut inp = BoundInputs::unit(3, 1);
            inp.b_phi = FeatureNormBound::Gaussian { n: 3, sigma_w: 2.0, scale: SQRT_2 };
            prop_assert!(approximation_bound(&inp, 2 * k).unwrap() < approximation_bound(&inp, k).unwrap());
        }
    }
}
