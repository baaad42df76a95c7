use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::kernel_rf::{KernelVariant, OperatorKernelSpec};

/// Append-only history `(t_i, x_i, c_i)` realizing the kernel input
/// `u(x) = sum_i K(x, x_i) c_i dt` (left-endpoint Riemann sum).
#[derive(Clone, Debug)]
pub struct TrajectoryTape {
    n: usize,
    d: usize,
    dt: f64,
    times: Vec<f64>,
    xs: Vec<f64>,
    cs: Vec<f64>,
}

impl TrajectoryTape {
    pub fn new(n: usize, d: usize, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("tape step must be positive, got {dt}")));
        }
        Ok(Self { n, d, dt, times: Vec::new(), xs: Vec::new(), cs: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn entry(&self, i: usize) -> (f64, &[f64], &[f64]) {
        (self.times[i], &self.xs[i * self.n..(i + 1) * self.n], &self.cs[i * self.d..(i + 1) * self.d])
    }

    /// Appends `(t, x, -gamma g_e^T gradQ)`.
    pub fn append(&mut self, t: f64, x: &[f64], gamma: f64, g_e: &DMatrix<f64>, grad_q: &DVector<f64>) -> Result<()> {
        check_dim("g_e rows", grad_q.len(), g_e.nrows())?;
        check_dim("g_e columns", self.d, g_e.ncols())?;
        let c = g_e.transpose() * grad_q * (-gamma);
        self.push(t, x, c.as_slice())
    }

    /// Appends a precomputed coefficient.
    pub fn push(&mut self, t: f64, x: &[f64], c: &[f64]) -> Result<()> {
        check_dim("tape state", self.n, x.len())?;
        check_dim("tape coefficient", self.d, c.len())?;
        if let Some(&last) = self.times.last() {
            let expected = last + self.dt;
            if (t - expected).abs() > 1e-6 * self.dt {
                return Err(Error::Sequencing { expected, got: t });
            }
        }
        self.times.push(t);
        self.xs.extend_from_slice(x);
        self.cs.extend_from_slice(c);
        Ok(())
    }

    /// `sum_i K(x, x_i) c_i dt`, summed in index order.
    pub fn input(&self, kernel: &OperatorKernelSpec, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim("query state", self.n, x.len())?;
        check_dim("kernel input dimension", self.n, kernel.n())?;
        check_dim("kernel output dimension", self.d, kernel.d())?;
        check_dim("input buffer", self.d, out.len())?;
        out.iter_mut().for_each(|v| *v = 0.0);
        if let KernelVariant::Decomposable { a, .. } = &kernel.variant {
            // accumulate sum_i k(x, x_i) c_i, then apply A once
            let mut acc = vec![0.0; self.d];
            for i in 0..self.len() {
                let xi = &self.xs[i * self.n..(i + 1) * self.n];
                let k = kernel.base.from_sq_dist(crate::kernel_rf::kernel::sq_dist(x, xi)) * self.dt;
                for (a, c) in acc.iter_mut().zip(&self.cs[i * self.d..(i + 1) * self.d]) {
                    *a += k * c;
                }
            }
            for (r, o) in out.iter_mut().enumerate() {
                *o = (0..self.d).map(|c| a[(r, c)] * acc[c]).sum();
            }
            return Ok(());
        }
        for i in 0..self.len() {
            let (_, xi, ci) = self.entry(i);
            kernel.apply_acc(x, xi, ci, self.dt, out);
        }
        Ok(())
    }
}

pub fn tape_append(
    tape: &mut TrajectoryTape,
    t: f64,
    x: &[f64],
    gamma: f64,
    g_e: &DMatrix<f64>,
    grad_q: &DVector<f64>,
) -> Result<()> {
    tape.append(t, x, gamma, g_e, grad_q)
}

pub fn nonparametric_input(tape: &TrajectoryTape, kernel: &OperatorKernelSpec, x: &[f64]) -> Result<DVector<f64>> {
    let mut out = vec![0.0; tape.d];
    tape.input(kernel, x, &mut out)?;
    Ok(DVector::from_vec(out))
}
