use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{check_dim, Error, Result};

/// `R - 2I` with `R` a seeded Gaussian matrix scaled to unit spectral norm.
pub const DEFAULT_A: [[f64; 5]; 5] = [
    [-2.017965716856029, -0.215944864020646, 0.19657629730814072, 0.11059998613463883, -0.26452986753122637],
    [-0.03123661260106347, -1.7643411323973572, -0.06607677400045289, -0.2368205506633615, -0.3148934402447618],
    [-0.36989155760875336, 0.38516929156184027, -2.4591360076446396, 0.5563833010126601, 0.20733049128581932],
    [0.144791081921754, 0.5249245418653569, 0.06710503651951287, -1.901138303506973, 0.21948533603478595],
    [-0.1225554361348258, -0.2812740047267756, -0.20247423866575467, -0.17783080402859122, -1.918044634804611],
];

pub fn default_a() -> DMatrix<f64> {
    DMatrix::from_fn(5, 5, |i, j| DEFAULT_A[i][j])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkKind {
    /// Constant setpoint, unknown `sin(x) erf(x)`.
    LtiStable,
    /// Oscillating reference, unknown `x^4 / 4`.
    QuarticUnstable,
}

/// `x' = A (x - x_d) + x_d' + u - h(x)`, matched uncertainty with `g = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlBenchmark {
    pub kind: BenchmarkKind,
    pub a: DMatrix<f64>,
}

impl ControlBenchmark {
    pub fn new(kind: BenchmarkKind, a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::Config("benchmark A must be square".into()));
        }
        let worst = a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if !(worst < 0.0) {
            return Err(Error::Config(format!("benchmark A must be Hurwitz (max real part {worst})")));
        }
        Ok(Self { kind, a })
    }

    pub fn lti() -> Self {
        Self { kind: BenchmarkKind::LtiStable, a: default_a() }
    }

    pub fn quartic() -> Self {
        Self { kind: BenchmarkKind::QuarticUnstable, a: default_a() }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn desired(&self, t: f64, out: &mut [f64]) {
        let v = match self.kind {
            BenchmarkKind::LtiStable => 1.5,
            BenchmarkKind::QuarticUnstable => (2.0 * PI * t + (SQRT_2 * PI * t).cos()).sin(),
        };
        out.iter_mut().for_each(|o| *o = v);
    }

    pub fn desired_rate(&self, t: f64, out: &mut [f64]) {
        let v = match self.kind {
            BenchmarkKind::LtiStable => 0.0,
            BenchmarkKind::QuarticUnstable => {
                let phase = 2.0 * PI * t + (SQRT_2 * PI * t).cos();
                phase.cos() * (2.0 * PI - SQRT_2 * PI * (SQRT_2 * PI * t).sin())
            }
        };
        out.iter_mut().for_each(|o| *o = v);
    }

    /// Unknown dynamics `h(x)`.
    pub fn uncertainty(&self, x: &[f64], out: &mut [f64]) {
        match self.kind {
            BenchmarkKind::LtiStable => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v.sin() * erf(*v);
                }
            }
            BenchmarkKind::QuarticUnstable => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = 0.25 * v.powi(4);
                }
            }
        }
    }

    pub fn rhs_into(&self, x: &[f64], u: &[f64], t: f64, out: &mut [f64]) {
        let n = self.n();
        let mut xd = vec![0.0; n];
        let mut h = vec![0.0; n];
        self.desired(t, &mut xd);
        self.desired_rate(t, out);
        self.uncertainty(x, &mut h);
        for i in 0..n {
            let ax: f64 = (0..n).map(|j| self.a[(i, j)] * (x[j] - xd[j])).sum();
            out[i] += ax + u[i] - h[i];
        }
    }

    pub fn rhs(&self, x: &[f64], u: &[f64], t: f64) -> Result<Vec<f64>> {
        check_dim("benchmark state", self.n(), x.len())?;
        check_dim("benchmark input", self.n(), u.len())?;
        let mut out = vec![0.0; self.n()];
        self.rhs_into(x, u, t, &mut out);
        Ok(out)
    }

    /// Tracking error `x - x_d(t)`.
    pub fn error(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut xd = vec![0.0; self.n()];
        self.desired(t, &mut xd);
        x.iter().zip(&xd).map(|(a, b)| a - b).collect()
    }

    /// Default initial condition `x_d(0) + offset`.
    pub fn initial_state(&self, offset: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.n()];
        self.desired(0.0, &mut x);
        x.iter_mut().for_each(|v| *v += offset);
        x
    }
}

pub fn control_rhs(bench: &ControlBenchmark, x: &[f64], u: &[f64], t: f64) -> Result<Vec<f64>> {
    bench.rhs(x, u, t)
}
