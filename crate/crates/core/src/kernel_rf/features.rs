use std::f64::consts::{SQRT_2, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::kernel::{FiniteFeatureMap, KernelVariant, OperatorKernelSpec, ScalarKernelSpec};
use crate::error::{check_dim, Error, Result};

/// One draw `theta = (w, b)` from the spectral measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSample {
    pub w: Vec<f64>,
    pub b: f64,
}

pub fn sample_feature<R: Rng + ?Sized>(spec: &OperatorKernelSpec, rng: &mut R) -> Result<FeatureSample> {
    if !spec.is_translation_invariant() {
        return Err(Error::Unsupported(format!(
            "cannot sample random features for the {} kernel",
            spec.variant.name()
        )));
    }
    let scale = spec.base.spectral_scale();
    let w = (0..spec.n()).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut b = rng.random_range(0.0..TAU);
    if b >= TAU {
        b = 0.0;
    }
    Ok(FeatureSample { w, b })
}

/// Feature maps that are linear in their weights: `x -> Psi(x)`, `d x D`.
pub trait LinearFeatures: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn matrix(&self, x: &[f64]) -> DMatrix<f64>;
    /// `out = Psi(x) alpha`
    fn apply(&self, x: &[f64], alpha: &[f64], out: &mut [f64]);
    /// `out = Psi(x)^T v`
    fn apply_transpose(&self, x: &[f64], v: &[f64], out: &mut [f64]);
}

/// `K` sampled features for one kernel, regenerated from `(spec, seed)`.
#[derive(Clone, Debug)]
pub struct FeatureBank {
    spec: OperatorKernelSpec,
    seed: u64,
    samples: Vec<FeatureSample>,
    // row-major K x n copy of the frequencies
    w: Vec<f64>,
    b: Vec<f64>,
}

impl FeatureBank {
    pub fn new(spec: OperatorKernelSpec, k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("feature count K must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..k).map(|_| sample_feature(&spec, &mut rng)).collect::<Result<Vec<_>>>()?;
        Self::from_samples(spec, samples, seed)
    }

    pub fn from_samples(spec: OperatorKernelSpec, samples: Vec<FeatureSample>, seed: u64) -> Result<Self> {
        if !spec.is_translation_invariant() {
            return Err(Error::Unsupported("finite-feature kernels have no feature bank".into()));
        }
        let n = spec.n();
        let mut w = Vec::with_capacity(samples.len() * n);
        for s in &samples {
            check_dim("feature frequency", n, s.w.len())?;
            if !(0.0..TAU).contains(&s.b) {
                return Err(Error::InvalidArgument(format!("phase {} outside [0, 2pi)", s.b)));
            }
            w.extend_from_slice(&s.w);
        }
        let b = samples.iter().map(|s| s.b).collect();
        Ok(Self { spec, seed, samples, w, b })
    }

    pub fn spec(&self) -> &OperatorKernelSpec {
        &self.spec
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn samples(&self) -> &[FeatureSample] {
        &self.samples
    }
    pub fn k(&self) -> usize {
        self.samples.len()
    }
    pub fn n(&self) -> usize {
        self.spec.n()
    }
    pub fn d(&self) -> usize {
        self.spec.d()
    }
    pub fn d1(&self) -> usize {
        self.spec.d1()
    }

    #[inline]
    pub fn frequency(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.w[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn phase_offset(&self, i: usize) -> f64 {
        self.b[i]
    }

    #[inline]
    pub fn phase(&self, i: usize, x: &[f64]) -> f64 {
        self.frequency(i).iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b[i]
    }

    /// `sqrt(2) cos(w_i^T x + b_i)` for every feature.
    pub fn activations(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.k()).map(|i| SQRT_2 * self.phase(i, x).cos()));
    }

    /// Output matrix `M(w_i)` of a block, without the sqrt(2) factor.
    pub fn block_output(&self, i: usize) -> DMatrix<f64> {
        let w = self.frequency(i);
        let n = self.n();
        match &self.spec.variant {
            KernelVariant::Decomposable { b, .. } => b.clone(),
            KernelVariant::CurlFree => DMatrix::from_column_slice(n, 1, w),
            KernelVariant::DivergenceFree => {
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return DMatrix::zeros(n, n);
                }
                DMatrix::from_fn(n, n, |r, c| {
                    let id = if r == c { norm } else { 0.0 };
                    id - w[r] * w[c] / norm
                })
            }
            KernelVariant::Symplectic { j } => {
                DMatrix::from_column_slice(n, 1, (j * DVector::from_column_slice(w)).as_slice())
            }
            KernelVariant::FiniteFeature(_) => unreachable!("banks are translation invariant"),
        }
    }

    /// Feature block `Phi(x, theta_i)`.
    pub fn block(&self, i: usize, x: &[f64]) -> DMatrix<f64> {
        self.block_output(i) * (SQRT_2 * self.phase(i, x).cos())
    }

    pub fn feature_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("feature matrix input", self.n(), x.len())?;
        Ok(LinearFeatures::matrix(self, x))
    }

    /// Entrywise mean and standard error of `Phi(x, theta_i) Phi(y, theta_i)^T`
    /// over the bank, i.e. `(1/K) Psi(x) Psi(y)^T` and its Monte-Carlo error.
    pub fn kernel_estimate(&self, x: &[f64], y: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        check_dim("kernel estimate x", self.n(), x.len())?;
        check_dim("kernel estimate y", self.n(), y.len())?;
        let d = self.d();
        let mut sum = DMatrix::<f64>::zeros(d, d);
        let mut sum_sq = DMatrix::<f64>::zeros(d, d);
        for i in 0..self.k() {
            let m = self.block_output(i);
            let s = 2.0 * self.phase(i, x).cos() * self.phase(i, y).cos();
            let prod = &m * m.transpose() * s;
            sum += &prod;
            sum_sq += prod.component_mul(&prod);
        }
        let kf = self.k() as f64;
        let mean = sum / kf;
        let var = (sum_sq / kf - mean.component_mul(&mean)).map(|v| v.max(0.0));
        let stderr = var.map(|v| (v * kf / (kf - 1.0).max(1.0)).sqrt() / kf.sqrt());
        Ok((mean, stderr))
    }
}

impl LinearFeatures for FeatureBank {
    fn input_dim(&self) -> usize {
        self.n()
    }
    fn output_dim(&self) -> usize {
        self.d()
    }
    fn feature_dim(&self) -> usize {
        self.k() * self.d1()
    }

    fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let d1 = self.d1();
        let mut out = DMatrix::zeros(self.d(), self.feature_dim());
        for i in 0..self.k() {
            out.columns_mut(i * d1, d1).copy_from(&self.block(i, x));
        }
        out
    }

    fn apply(&self, x: &[f64], alpha: &[f64], out: &mut [f64]) {
        let (n, d1) = (self.n(), self.d1());
        out.iter_mut().for_each(|v| *v = 0.0);
        match &self.spec.variant {
            KernelVariant::Decomposable { b, .. } => {
                let mut acc = vec![0.0; d1];
                for i in 0..self.k() {
                    let s = SQRT_2 * self.phase(i, x).cos();
                    for (a, al) in acc.iter_mut().zip(&alpha[i * d1..(i + 1) * d1]) {
                        *a += s * al;
                    }
                }
                for (r, o) in out.iter_mut().enumerate() {
                    *o = (0..d1).map(|c| b[(r, c)] * acc[c]).sum();
                }
            }
            KernelVariant::CurlFree => {
                for i in 0..self.k() {
                    let s = SQRT_2 * self.phase(i, x).cos() * alpha[i];
                    for (o, w) in out.iter_mut().zip(self.frequency(i)) {
                        *o += s * w;
                    }
                }
            }
            KernelVariant::DivergenceFree => {
                for i in 0..self.k() {
                    let w = self.frequency(i);
                    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        continue;
                    }
                    let s = SQRT_2 * self.phase(i, x).cos();
                    let a = &alpha[i * n..(i + 1) * n];
                    let wa: f64 = w.iter().zip(a).map(|(p, q)| p * q).sum();
                    for r in 0..n {
                        out[r] += s * (norm * a[r] - w[r] * wa / norm);
                    }
                }
            }
            KernelVariant::Symplectic { j } => {
                let mut acc = vec![0.0; n];
                for i in 0..self.k() {
                    let s = SQRT_2 * self.phase(i, x).cos() * alpha[i];
                    for (a, w) in acc.iter_mut().zip(self.frequency(i)) {
                        *a += s * w;
                    }
                }
                for (r, o) in out.iter_mut().enumerate() {
                    *o = (0..n).map(|c| j[(r, c)] * acc[c]).sum();
                }
            }
            KernelVariant::FiniteFeature(_) => unreachable!("banks are translation invariant"),
        }
    }

    fn apply_transpose(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let (n, d1) = (self.n(), self.d1());
        match &self.spec.variant {
            KernelVariant::Decomposable { b, .. } => {
                let btv: Vec<f64> = (0..d1).map(|c| (0..b.nrows()).map(|r| b[(r, c)] * v[r]).sum()).collect();
                for i in 0..self.k() {
                    let s = SQRT_2 * self.phase(i, x).cos();
                    for (o, bv) in out[i * d1..(i + 1) * d1].iter_mut().zip(&btv) {
                        *o = s * bv;
                    }
                }
            }
            KernelVariant::CurlFree => {
                for i in 0..self.k() {
                    let wv: f64 = self.frequency(i).iter().zip(v).map(|(a, b)| a * b).sum();
                    out[i] = SQRT_2 * self.phase(i, x).cos() * wv;
                }
            }
            KernelVariant::DivergenceFree => {
                for i in 0..self.k() {
                    let w = self.frequency(i);
                    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let blk = &mut out[i * n..(i + 1) * n];
                    if norm == 0.0 {
                        blk.iter_mut().for_each(|o| *o = 0.0);
                        continue;
                    }
                    let s = SQRT_2 * self.phase(i, x).cos();
                    let wv: f64 = w.iter().zip(v).map(|(p, q)| p * q).sum();
                    for r in 0..n {
                        blk[r] = s * (norm * v[r] - w[r] * wv / norm);
                    }
                }
            }
            KernelVariant::Symplectic { j } => {
                let jtv: Vec<f64> = (0..n).map(|c| (0..n).map(|r| j[(r, c)] * v[r]).sum()).collect();
                for i in 0..self.k() {
                    let wv: f64 = self.frequency(i).iter().zip(&jtv).map(|(a, b)| a * b).sum();
                    out[i] = SQRT_2 * self.phase(i, x).cos() * wv;
                }
            }
            KernelVariant::FiniteFeature(_) => unreachable!("banks are translation invariant"),
        }
    }
}

impl LinearFeatures for FiniteFeatureMap {
    fn input_dim(&self) -> usize {
        self.n()
    }
    fn output_dim(&self) -> usize {
        self.d()
    }
    fn feature_dim(&self) -> usize {
        self.p()
    }
    fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.d(), self.p());
        self.eval_into(x, &mut out);
        out
    }
    fn apply(&self, x: &[f64], alpha: &[f64], out: &mut [f64]) {
        let phi = self.matrix(x);
        let r = phi * DVector::from_column_slice(alpha);
        out.copy_from_slice(r.as_slice());
    }
    fn apply_transpose(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let phi = self.matrix(x);
        let r = phi.transpose() * DVector::from_column_slice(v);
        out.copy_from_slice(r.as_slice());
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    Decomposable,
    CurlFree,
    DivergenceFree,
    Symplectic,
    FiniteFeature,
}

/// JSON form of a kernel and its feature bank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub variant: VariantName,
    pub sigma: f64,
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<usize>,
    #[serde(rename = "K", default = "default_features")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    /// Rows of the decomposable factor `B`; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<Vec<Vec<f64>>>,
    /// Builtin map name for the finite-feature variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_map: Option<String>,
}

fn default_features() -> usize {
    100
}

impl KernelConfig {
    pub fn to_spec(&self) -> Result<OperatorKernelSpec> {
        let base = ScalarKernelSpec::new(self.sigma)?;
        let spec = match self.variant {
            VariantName::Decomposable => {
                let b = match &self.factor {
                    None => DMatrix::identity(self.d, self.d),
                    Some(rows) => {
                        let cols = rows.first().map_or(0, |r| r.len());
                        if rows.iter().any(|r| r.len() != cols) {
                            return Err(Error::Config("factor rows have unequal lengths".into()));
                        }
                        DMatrix::from_row_iterator(rows.len(), cols, rows.iter().flatten().copied())
                    }
                };
                OperatorKernelSpec::decomposable(base, self.n, b)?
            }
            VariantName::CurlFree => OperatorKernelSpec::curl_free(base, self.n)?,
            VariantName::DivergenceFree => OperatorKernelSpec::divergence_free(base, self.n)?,
            VariantName::Symplectic => OperatorKernelSpec::symplectic(base, self.n)?,
            VariantName::FiniteFeature => {
                let name = self.feature_map.as_deref().unwrap_or("tanh-sin");
                OperatorKernelSpec::finite_feature(base, FiniteFeatureMap::builtin(name, self.n)?)
            }
        };
        if spec.d() != self.d {
            return Err(Error::Config(format!(
                "{} kernel with n = {} has output dimension {}, config says d = {}",
                spec.variant.name(),
                self.n,
                spec.d(),
                self.d
            )));
        }
        if let Some(d1) = self.d1 {
            if d1 != spec.d1() {
                return Err(Error::Config(format!(
                    "config says d1 = {d1} but the {} kernel has d1 = {}",
                    spec.variant.name(),
                    spec.d1()
                )));
            }
        }
        Ok(spec)
    }

    pub fn build_bank(&self) -> Result<FeatureBank> {
        FeatureBank::new(self.to_spec()?, self.k, self.seed)
    }
}
