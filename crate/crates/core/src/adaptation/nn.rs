use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
pub fn swish(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
pub fn swish_prime(z: f64) -> f64 {
    let s = sigmoid(z);
    s + z * s * (1.0 - s)
}

/// Single hidden-layer network `V swish(W x + b_h) + b_o`.
///
/// Flattened parameter order: `W` (row-major), `b_h`, `V` (row-major), `b_o`.
#[derive(Clone, Debug, PartialEq)]
pub struct NNParams {
    pub w: DMatrix<f64>,
    pub b_h: DVector<f64>,
    pub v: DMatrix<f64>,
    pub b_o: DVector<f64>,
}

impl NNParams {
    pub fn zeros(n: usize, width: usize, d: usize) -> Self {
        Self {
            w: DMatrix::zeros(width, n),
            b_h: DVector::zeros(width),
            v: DMatrix::zeros(d, width),
            b_o: DVector::zeros(d),
        }
    }

    /// Hidden layer from `N(0, 1/n)`; output layer zero, so the initial output is zero.
    pub fn init<R: Rng + ?Sized>(n: usize, width: usize, d: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (n as f64).sqrt();
        let mut p = Self::zeros(n, width, d);
        for j in 0..width {
            for i in 0..n {
                p.w[(j, i)] = scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        for j in 0..width {
            p.b_h[j] = scale * rng.sample::<f64, _>(StandardNormal);
        }
        p
    }

    pub fn n(&self) -> usize {
        self.w.ncols()
    }
    pub fn width(&self) -> usize {
        self.w.nrows()
    }
    pub fn d(&self) -> usize {
        self.v.nrows()
    }

    pub fn num_params(&self) -> usize {
        let (n, h, d) = (self.n(), self.width(), self.d());
        h * n + h + d * h + d
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for j in 0..self.width() {
            out.extend(self.w.row(j).iter());
        }
        out.extend(self.b_h.iter());
        for k in 0..self.d() {
            out.extend(self.v.row(k).iter());
        }
        out.extend(self.b_o.iter());
        out
    }

    pub fn unflatten(n: usize, width: usize, d: usize, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(n, width, d);
        check_dim("flattened network parameters", p.num_params(), flat.len())?;
        let mut it = flat.iter().copied();
        for j in 0..width {
            for i in 0..n {
                p.w[(j, i)] = it.next().unwrap();
            }
        }
        for j in 0..width {
            p.b_h[j] = it.next().unwrap();
        }
        for k in 0..d {
            for j in 0..width {
                p.v[(k, j)] = it.next().unwrap();
            }
        }
        for k in 0..d {
            p.b_o[k] = it.next().unwrap();
        }
        Ok(p)
    }

    /// Adds `dt * rate` to the flattened parameters.
    pub fn step(&mut self, rate: &[f64], dt: f64) -> Result<()> {
        check_dim("network rate", self.num_params(), rate.len())?;
        let (n, h, d) = (self.n(), self.width(), self.d());
        let mut idx = 0;
        for j in 0..h {
            for i in 0..n {
                self.w[(j, i)] += dt * rate[idx];
                idx += 1;
            }
        }
        for j in 0..h {
            self.b_h[j] += dt * rate[idx];
            idx += 1;
        }
        for k in 0..d {
            for j in 0..h {
                self.v[(k, j)] += dt * rate[idx];
                idx += 1;
            }
        }
        for k in 0..d {
            self.b_o[k] += dt * rate[idx];
            idx += 1;
        }
        Ok(())
    }

    fn preactivation(&self, x: &[f64]) -> DVector<f64> {
        &self.w * DVector::from_column_slice(x) + &self.b_h
    }

    pub fn forward(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_dim("network input", self.n(), x.len())?;
        let s = self.preactivation(x).map(swish);
        Ok(&self.v * s + &self.b_o)
    }

    /// `d x P` Jacobian of the output with respect to the flattened parameters.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_dim("network input", self.n(), x.len())?;
        let (n, h, d) = (self.n(), self.width(), self.d());
        let z = self.preactivation(x);
        let mut jac = DMatrix::zeros(d, self.num_params());
        let off_bh = h * n;
        let off_v = off_bh + h;
        let off_bo = off_v + d * h;
        for j in 0..h {
            let sp = swish_prime(z[j]);
            let s = swish(z[j]);
            for k in 0..d {
                let g = self.v[(k, j)] * sp;
                for i in 0..n {
                    jac[(k, j * n + i)] = g * x[i];
                }
                jac[(k, off_bh + j)] = g;
                jac[(k, off_v + k * h + j)] = s;
            }
        }
        for k in 0..d {
            jac[(k, off_bo + k)] = 1.0;
        }
        Ok(jac)
    }

    /// `-gamma J^T v`, without forming `J`.
    pub fn rate_from_output_gradient(&self, x: &[f64], v: &[f64], gamma: f64, out: &mut [f64]) {
        let (n, h, d) = (self.n(), self.width(), self.d());
        let off_bh = h * n;
        let off_v = off_bh + h;
        let off_bo = off_v + d * h;
        for j in 0..h {
            let z: f64 = self.b_h[j] + (0..n).map(|i| self.w[(j, i)] * x[i]).sum::<f64>();
            let (s, sp) = (swish(z), swish_prime(z));
            let back: f64 = (0..d).map(|k| self.v[(k, j)] * v[k]).sum::<f64>() * sp;
            for i in 0..n {
                out[j * n + i] = -gamma * back * x[i];
            }
            out[off_bh + j] = -gamma * back;
            for k in 0..d {
                out[off_v + k * h + j] = -gamma * v[k] * s;
            }
        }
        for k in 0..d {
            out[off_bo + k] = -gamma * v[k];
        }
    }
}

pub fn nn_forward(params: &NNParams, x: &[f64]) -> Result<DVector<f64>> {
    params.forward(x)
}

/// `-gamma J^T g_e^T gradQ`.
pub fn nn_update_rhs(
    params: &NNParams,
    x: &[f64],
    g_e: &DMatrix<f64>,
    grad_q: &DVector<f64>,
    gamma: f64,
) -> Result<DVector<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {gamma}")));
    }
    check_dim("network input", params.n(), x.len())?;
    check_dim("g_e rows", grad_q.len(), g_e.nrows())?;
    check_dim("g_e columns", params.d(), g_e.ncols())?;
    let v = g_e.transpose() * grad_q;
    let mut out = vec![0.0; params.num_params()];
    params.rate_from_output_gradient(x, v.as_slice(), gamma, &mut out);
    Ok(DVector::from_vec(out))
}
