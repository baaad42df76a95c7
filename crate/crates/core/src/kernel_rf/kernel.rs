use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Gaussian kernel `exp(-|x - y|^2 / (2 sigma^2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarKernelSpec {
    pub sigma: f64,
}

impl ScalarKernelSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    /// Standard deviation of the spectral measure, `1 / sigma`.
    pub fn spectral_scale(&self) -> f64 {
        1.0 / self.sigma
    }

    #[inline]
    pub fn from_sq_dist(&self, r2: f64) -> f64 {
        (-0.5 * r2 / (self.sigma * self.sigma)).exp()
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim("kernel argument", x.len(), y.len())?;
        Ok(self.from_sq_dist(sq_dist(x, y)))
    }
}

pub fn eval_scalar_kernel(spec: &ScalarKernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.eval(x, y)
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

type FeatureFn = dyn Fn(&[f64], &mut DMatrix<f64>) + Send + Sync;

/// Explicit feature matrix `x -> Phi(x)` of shape `d x p`, giving the kernel
/// `Phi(x) Phi(y)^T`.
#[derive(Clone)]
pub struct FiniteFeatureMap {
    name: String,
    n: usize,
    d: usize,
    p: usize,
    eval: Arc<FeatureFn>,
}

impl fmt::Debug for FiniteFeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteFeatureMap")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("d", &self.d)
            .field("p", &self.p)
            .finish()
    }
}

impl PartialEq for FiniteFeatureMap {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.n == other.n && self.d == other.d && self.p == other.p
    }
}

impl FiniteFeatureMap {
    /// `eval` must overwrite every entry of the `d x p` output.
    pub fn new(
        name: impl Into<String>,
        n: usize,
        d: usize,
        p: usize,
        eval: impl Fn(&[f64], &mut DMatrix<f64>) + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), n, d, p, eval: Arc::new(eval) }
    }

    /// Named maps usable from configuration files.
    ///
    /// `tanh-sin`: `d = n`, `p = n + 1`; column `j < n` is `tanh(x_j) e_j`,
    /// the last column is `sin(x)`.
    /// `linear`: `d = p = n`, `Phi(x) = diag(x)`.
    pub fn builtin(name: &str, n: usize) -> Result<Self> {
        match name {
            "linear" => Ok(Self::new(name, n, n, n, move |x, out| {
                out.fill(0.0);
                for j in 0..n {
                    out[(j, j)] = x[j];
                }
            })),
            "tanh-sin" => Ok(Self::new(name, n, n, n + 1, move |x, out| {
                out.fill(0.0);
                for j in 0..n {
                    out[(j, j)] = x[j].tanh();
                    out[(j, n)] = x[j].sin();
                }
            })),
            other => Err(Error::Config(format!("unknown feature map '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn eval_into(&self, x: &[f64], out: &mut DMatrix<f64>) {
        (self.eval)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("feature map input", self.n, x.len())?;
        let mut out = DMatrix::zeros(self.d, self.p);
        (self.eval)(x, &mut out);
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelVariant {
    /// `A k` with `A = B B^T`; `b` is `d x d1`.
    Decomposable {
        b: DMatrix<f64>,
        a: DMatrix<f64>,
    },
    CurlFree,
    DivergenceFree,
    /// `J (-hess k) J^T`.
    Symplectic {
        j: DMatrix<f64>,
    },
    FiniteFeature(FiniteFeatureMap),
}

impl KernelVariant {
    pub fn name(&self) -> &'static str {
        match self {
            KernelVariant::Decomposable { .. } => "decomposable",
            KernelVariant::CurlFree => "curl-free",
            KernelVariant::DivergenceFree => "divergence-free",
            KernelVariant::Symplectic { .. } => "symplectic",
            KernelVariant::FiniteFeature(_) => "finite-feature",
        }
    }
}

/// Canonical `[[0, I], [-I, 0]]` of size `dim` (even).
pub fn canonical_symplectic(dim: usize) -> Result<DMatrix<f64>> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::Config(format!("symplectic kernel needs an even dimension, got {dim}")));
    }
    let h = dim / 2;
    let mut j = DMatrix::zeros(dim, dim);
    for i in 0..h {
        j[(i, h + i)] = 1.0;
        j[(h + i, i)] = -1.0;
    }
    Ok(j)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorKernelSpec {
    pub variant: KernelVariant,
    pub base: ScalarKernelSpec,
    n: usize,
    d: usize,
}

impl OperatorKernelSpec {
    pub fn decomposable(base: ScalarKernelSpec, n: usize, b: DMatrix<f64>) -> Result<Self> {
        if b.nrows() == 0 || b.ncols() == 0 {
            return Err(Error::Config("decomposable factor must be nonempty".into()));
        }
        let a = &b * b.transpose();
        let d = b.nrows();
        Ok(Self { variant: KernelVariant::Decomposable { b, a }, base, n, d })
    }

    /// Decomposable kernel with `A = I_d`.
    pub fn scalar_identity(base: ScalarKernelSpec, n: usize, d: usize) -> Result<Self> {
        Self::decomposable(base, n, DMatrix::identity(d, d))
    }

    pub fn curl_free(base: ScalarKernelSpec, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("curl-free kernel needs n >= 1".into()));
        }
        Ok(Self { variant: KernelVariant::CurlFree, base, n, d: n })
    }

    pub fn divergence_free(base: ScalarKernelSpec, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("divergence-free kernel needs n >= 2".into()));
        }
        Ok(Self { variant: KernelVariant::DivergenceFree, base, n, d: n })
    }

    pub fn symplectic(base: ScalarKernelSpec, n: usize) -> Result<Self> {
        let j = canonical_symplectic(n)?;
        Self::symplectic_with(base, j)
    }

    pub fn symplectic_with(base: ScalarKernelSpec, j: DMatrix<f64>) -> Result<Self> {
        let n = j.nrows();
        if n == 0 || !n.is_multiple_of(2) || j.ncols() != n {
            return Err(Error::Config(format!(
                "symplectic kernel needs an even square J, got {}x{}",
                j.nrows(),
                j.ncols()
            )));
        }
        let orth = (j.transpose() * &j - DMatrix::<f64>::identity(n, n)).amax();
        let skew = (j.transpose() + &j).amax();
        if orth > 1e-12 || skew > 1e-12 {
            return Err(Error::Config("J must satisfy J^T J = I and J^T = -J".into()));
        }
        Ok(Self { variant: KernelVariant::Symplectic { j }, base, n, d: n })
    }

    pub fn finite_feature(base: ScalarKernelSpec, map: FiniteFeatureMap) -> Self {
        let (n, d) = (map.n(), map.d());
        Self { variant: KernelVariant::FiniteFeature(map), base, n, d }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }

    /// Column count of a single feature block.
    pub fn d1(&self) -> usize {
        match &self.variant {
            KernelVariant::Decomposable { b, .. } => b.ncols(),
            KernelVariant::CurlFree | KernelVariant::Symplectic { .. } => 1,
            KernelVariant::DivergenceFree => self.n,
            KernelVariant::FiniteFeature(map) => map.p(),
        }
    }

    pub fn is_translation_invariant(&self) -> bool {
        !matches!(self.variant, KernelVariant::FiniteFeature(_))
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("kernel argument x", self.n, x.len())?;
        check_dim("kernel argument y", self.n, y.len())?;
        let mut out = DMatrix::zeros(self.d, self.d);
        let mut c = vec![0.0; self.d];
        let mut col = vec![0.0; self.d];
        for j in 0..self.d {
            c.iter_mut().for_each(|v| *v = 0.0);
            c[j] = 1.0;
            col.iter_mut().for_each(|v| *v = 0.0);
            self.apply_acc(x, y, &c, 1.0, &mut col);
            for i in 0..self.d {
                out[(i, j)] = col[i];
            }
        }
        Ok(out)
    }

    /// `out += scale * K(x, y) c` without forming the matrix. No dimension checks.
    pub fn apply_acc(&self, x: &[f64], y: &[f64], c: &[f64], scale: f64, out: &mut [f64]) {
        let s2 = self.base.sigma * self.base.sigma;
        match &self.variant {
            KernelVariant::Decomposable { a, .. } => {
                let k = scale * self.base.from_sq_dist(sq_dist(x, y));
                if k == 0.0 {
                    return;
                }
                for (j, &cj) in c.iter().enumerate() {
                    if cj == 0.0 {
                        continue;
                    }
                    let kc = k * cj;
                    for (o, &aij) in out.iter_mut().zip(a.column(j).iter()) {
                        *o += kc * aij;
                    }
                }
            }
            KernelVariant::CurlFree => {
                // k (I / s^2 - r r^T / s^4) c
                let r2 = sq_dist(x, y);
                let k = scale * self.base.from_sq_dist(r2);
                let rc: f64 = x.iter().zip(y).zip(c).map(|((a, b), ci)| (a - b) * ci).sum();
                for i in 0..out.len() {
                    let ri = x[i] - y[i];
                    out[i] += k * (c[i] / s2 - ri * rc / (s2 * s2));
                }
            }
            KernelVariant::DivergenceFree => {
                // k ((n-1)/s^2 I + (r r^T - |r|^2 I) / s^4) c
                let r2 = sq_dist(x, y);
                let k = scale * self.base.from_sq_dist(r2);
                let rc: f64 = x.iter().zip(y).zip(c).map(|((a, b), ci)| (a - b) * ci).sum();
                let diag = (self.n as f64 - 1.0) / s2 - r2 / (s2 * s2);
                for i in 0..out.len() {
                    let ri = x[i] - y[i];
                    out[i] += k * (diag * c[i] + ri * rc / (s2 * s2));
                }
            }
            KernelVariant::Symplectic { j } => {
                // J (k (I/s^2 - r r^T/s^4)) J^T c
                let r2 = sq_dist(x, y);
                let k = scale * self.base.from_sq_dist(r2);
                let n = self.n;
                let jtc: Vec<f64> = (0..n).map(|i| (0..n).map(|l| j[(l, i)] * c[l]).sum()).collect();
                let jr: Vec<f64> = {
                    let r: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                    (0..n).map(|i| (0..n).map(|l| j[(i, l)] * r[l]).sum()).collect()
                };
                let rjtc: f64 = x.iter().zip(y).zip(&jtc).map(|((a, b), v)| (a - b) * v).sum();
                for i in 0..n {
                    let jm: f64 = (0..n).map(|l| j[(i, l)] * jtc[l]).sum();
                    out[i] += k * (jm / s2 - jr[i] * rjtc / (s2 * s2));
                }
            }
            KernelVariant::FiniteFeature(map) => {
                let mut px = DMatrix::zeros(map.d(), map.p());
                let mut py = DMatrix::zeros(map.d(), map.p());
                map.eval_into(x, &mut px);
                map.eval_into(y, &mut py);
                let cv = DVector::from_column_slice(c);
                let v = px * (py.transpose() * cv);
                for (o, vi) in out.iter_mut().zip(v.iter()) {
                    *o += scale * vi;
                }
            }
        }
    }
}

pub fn eval_operator_kernel(spec: &OperatorKernelSpec, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
    spec.eval(x, y)
}
