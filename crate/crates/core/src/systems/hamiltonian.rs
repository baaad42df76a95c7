use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernel_rf::{FeatureBank, OperatorKernelSpec, ScalarKernelSpec};

/// How initial momenta are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentumMode {
    /// Gaussian momenta with standard deviation `momentum_scale`.
    #[default]
    Random,
    /// Rotation about the center of mass in the first coordinate plane, each
    /// speed balancing the inward pull on that body (exactly circular for two
    /// bodies), plus Gaussian noise of size `momentum_scale`.
    Rotating,
}

/// Equal-mass gravitational `m`-body problem in `d` dimensions with state
/// `x = (q, p)`, positions and momenta stacked body by body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub m: usize,
    pub d: usize,
    /// Measurement feedback gain `k`.
    #[serde(default = "default_gain")]
    pub k_gain: f64,
    /// Spectral scale of the feature frequencies.
    #[serde(default = "default_sigma_w")]
    pub sigma_w: f64,
    /// Runs abort when two bodies come closer than this.
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_min_separation")]
    pub min_separation: f64,
    /// Standard deviation of the initial momenta.
    #[serde(default = "default_momentum_scale")]
    pub momentum_scale: f64,
    /// Side of the cube the initial positions are drawn from.
    #[serde(default = "default_box")]
    pub box_size: f64,
    #[serde(default)]
    pub momentum_mode: MomentumMode,
}

fn default_gain() -> f64 {
    1.0
}
fn default_sigma_w() -> f64 {
    1.0
}
fn default_floor() -> f64 {
    1e-3
}
fn default_min_separation() -> f64 {
    0.5
}
fn default_momentum_scale() -> f64 {
    0.3
}
fn default_box() -> f64 {
    2.0
}

impl HamiltonianSpec {
    pub fn new(m: usize, d: usize) -> Self {
        Self {
            m,
            d,
            k_gain: default_gain(),
            sigma_w: default_sigma_w(),
            floor: default_floor(),
            min_separation: default_min_separation(),
            momentum_scale: default_momentum_scale(),
            box_size: default_box(),
            momentum_mode: MomentumMode::Random,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.d == 0 {
            return Err(Error::Config(format!("need m >= 2 bodies and d >= 1, got m = {}, d = {}", self.m, self.d)));
        }
        for (name, v) in [
            ("k_gain", self.k_gain),
            ("sigma_w", self.sigma_w),
            ("floor", self.floor),
            ("min_separation", self.min_separation),
            ("box_size", self.box_size),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.momentum_scale >= 0.0) {
            return Err(Error::Config("momentum_scale must be nonnegative".into()));
        }
        if self.momentum_mode == MomentumMode::Rotating && self.d < 2 {
            return Err(Error::Config("rotating initial momenta need d >= 2".into()));
        }
        if self.min_separation <= self.floor {
            return Err(Error::Config("min_separation must exceed the singularity floor".into()));
        }
        Ok(())
    }

    pub fn md(&self) -> usize {
        self.m * self.d
    }

    pub fn state_dim(&self) -> usize {
        2 * self.md()
    }

    /// Smallest pairwise distance between bodies.
    pub fn min_distance(&self, q: &[f64]) -> f64 {
        let d = self.d;
        let mut best = f64::INFINITY;
        for i in 0..self.m {
            for j in i + 1..self.m {
                let r2: f64 = (0..d).map(|k| (q[i * d + k] - q[j * d + k]).powi(2)).sum();
                best = best.min(r2.sqrt());
            }
        }
        best
    }

    fn check_floor(&self, q: &[f64]) -> Result<()> {
        let r = self.min_distance(q);
        if !(r >= self.floor) {
            return Err(Error::Singularity { distance: r, floor: self.floor });
        }
        Ok(())
    }

    /// `H = sum |p_i|^2 / 2 - sum_{i<j} 1 / |q_i - q_j|`
    pub fn energy(&self, q: &[f64], p: &[f64]) -> Result<f64> {
        check_dim("positions", self.md(), q.len())?;
        check_dim("momenta", self.md(), p.len())?;
        self.check_floor(q)?;
        let d = self.d;
        let kinetic = 0.5 * p.iter().map(|v| v * v).sum::<f64>();
        let mut potential = 0.0;
        for i in 0..self.m {
            for j in i + 1..self.m {
                let r2: f64 = (0..d).map(|k| (q[i * d + k] - q[j * d + k]).powi(2)).sum();
                potential -= 1.0 / r2.sqrt();
            }
        }
        Ok(kinetic + potential)
    }

    /// `(dH/dq, dH/dp)`.
    pub fn grads(&self, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim("positions", self.md(), q.len())?;
        check_dim("momenta", self.md(), p.len())?;
        self.check_floor(q)?;
        let mut gq = vec![0.0; self.md()];
        self.potential_grad(q, &mut gq);
        Ok((gq, p.to_vec()))
    }

    fn potential_grad(&self, q: &[f64], gq: &mut [f64]) {
        let d = self.d;
        gq.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..self.m {
            for j in i + 1..self.m {
                let r2: f64 = (0..d).map(|k| (q[i * d + k] - q[j * d + k]).powi(2)).sum();
                let inv3 = 1.0 / (r2 * r2.sqrt());
                for k in 0..d {
                    // d/dq_i of -1/r is (q_i - q_j) / r^3
                    let g = (q[i * d + k] - q[j * d + k]) * inv3;
                    gq[i * d + k] += g;
                    gq[j * d + k] -= g;
                }
            }
        }
    }

    /// Symplectic vector field `(dH/dp, -dH/dq)` at `x = (q, p)`.
    pub fn rhs_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim("n-body state", self.state_dim(), x.len())?;
        self.check_floor(&x[..self.md()])?;
        self.vector_field(x, out);
        Ok(())
    }

    /// Vector field without dimension or floor checks.
    pub fn vector_field(&self, x: &[f64], out: &mut [f64]) {
        let md = self.md();
        let (q, p) = x.split_at(md);
        let (oq, op) = out.split_at_mut(md);
        oq.copy_from_slice(p);
        self.potential_grad(q, op);
        op.iter_mut().for_each(|v| *v = -*v);
    }

    pub fn rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.state_dim()];
        self.rhs_into(x, &mut out)?;
        Ok(out)
    }

    /// Seeded positions uniform in a cube with every pair at least
    /// `min_separation` apart, Gaussian momenta with the mean removed.
    pub fn initial_state(&self, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let md = self.md();
        let half = 0.5 * self.box_size;
        let mut q = vec![0.0; md];
        'outer: for _ in 0..10_000 {
            q.iter_mut().for_each(|v| *v = rng.random_range(-half..half));
            if self.min_distance(&q) >= self.min_separation {
                let mut p: Vec<f64> =
                    (0..md).map(|_| self.momentum_scale * rng.sample::<f64, _>(StandardNormal)).collect();
                if self.momentum_mode == MomentumMode::Rotating {
                    self.add_rotation(&q, &mut p);
                }
                for k in 0..self.d {
                    let mean = (0..self.m).map(|i| p[i * self.d + k]).sum::<f64>() / self.m as f64;
                    (0..self.m).for_each(|i| p[i * self.d + k] -= mean);
                }
                q.extend(p);
                break 'outer;
            }
        }
        if q.len() != 2 * md {
            return Err(Error::Config(format!(
                "could not place {} bodies at separation {} in a box of side {}",
                self.m, self.min_separation, self.box_size
            )));
        }
        Ok(q)
    }

    fn add_rotation(&self, q: &[f64], p: &mut [f64]) {
        let (m, d) = (self.m, self.d);
        let mut force = vec![0.0; self.md()];
        self.potential_grad(q, &mut force);
        let com: Vec<f64> = (0..d).map(|k| (0..m).map(|i| q[i * d + k]).sum::<f64>() / m as f64).collect();
        for i in 0..m {
            let rx = q[i * d] - com[0];
            let ry = q[i * d + 1] - com[1];
            let rho = (rx * rx + ry * ry).sqrt();
            if rho == 0.0 {
                continue;
            }
            // grad V points away from the attracting mass, so the inward pull is its outward component
            let pull = (force[i * d] * rx + force[i * d + 1] * ry) / rho;
            let v = (pull.max(0.0) * rho).sqrt();
            p[i * d] += -v * ry / rho;
            p[i * d + 1] += v * rx / rho;
        }
    }

    /// Symplectic random-feature bank over the full `2md` state.
    pub fn feature_bank(&self, k: usize, seed: u64) -> Result<FeatureBank> {
        let base = ScalarKernelSpec::new(1.0 / self.sigma_w)?;
        FeatureBank::new(OperatorKernelSpec::symplectic(base, self.state_dim())?, k, seed)
    }
}

pub fn hamiltonian(spec: &HamiltonianSpec, q: &[f64], p: &[f64]) -> Result<f64> {
    spec.energy(q, p)
}

pub fn hamiltonian_grads(spec: &HamiltonianSpec, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.grads(q, p)
}

/// Learned Hamiltonian `H^(x) = sum_i alpha_i cos(w_i^T x + b_i)`.
pub fn learned_hamiltonian(bank: &FeatureBank, weights: &[f64], xhat: &[f64]) -> f64 {
    (0..bank.k()).map(|i| weights[i] * bank.phase(i, xhat).cos()).sum()
}

/// `grad Psi_i(x) = -sin(w_i^T x + b_i) w_i`, as a `K x n` row-major matrix.
pub fn feature_gradients(bank: &FeatureBank, x: &[f64]) -> Vec<f64> {
    let n = bank.n();
    let mut g = vec![0.0; bank.k() * n];
    for i in 0..bank.k() {
        let s = -bank.phase(i, x).sin();
        for (o, w) in g[i * n..(i + 1) * n].iter_mut().zip(bank.frequency(i)) {
            *o = s * w;
        }
    }
    g
}

/// Learned vector field `J grad H^(xhat)`.
pub fn learned_field_into(spec: &HamiltonianSpec, bank: &FeatureBank, weights: &[f64], xhat: &[f64], out: &mut [f64]) {
    let md = spec.md();
    let mut grad = vec![0.0; 2 * md];
    for i in 0..bank.k() {
        let a = weights[i];
        if a == 0.0 {
            continue;
        }
        let s = bank.phase(i, xhat).sin();
        for (g, wk) in grad.iter_mut().zip(bank.frequency(i)) {
            *g -= a * s * wk;
        }
    }
    let (gq, gp) = grad.split_at(md);
    out[..md].copy_from_slice(gp);
    out[md..].iter_mut().zip(gq).for_each(|(o, g)| *o = -g);
}

/// Predictor drift `J grad H^(xhat) + k (x - xhat)` and weight rate
/// `-gamma (grad_p Psi^T q~ - grad_q Psi^T p~)` with `(q~, p~) = xhat - x`.
#[allow(clippy::too_many_arguments)]
pub fn symplectic_predictor_rhs_into(
    spec: &HamiltonianSpec,
    bank: &FeatureBank,
    weights: &[f64],
    gamma: f64,
    xhat: &[f64],
    x: &[f64],
    drift: &mut [f64],
    rate: &mut [f64],
) {
    let md = spec.md();
    let n = 2 * md;
    let mut grad = vec![0.0; n];
    for i in 0..bank.k() {
        let s = bank.phase(i, xhat).sin();
        let w = bank.frequency(i);
        let a = weights[i];
        if a != 0.0 {
            for (g, wk) in grad.iter_mut().zip(w) {
                *g -= a * s * wk;
            }
        }
        let (wq, wp) = w.split_at(md);
        let mut acc = 0.0;
        for k in 0..md {
            acc += wp[k] * (xhat[k] - x[k]) - wq[k] * (xhat[md + k] - x[md + k]);
        }
        // grad_p Psi_i = -s w_p, grad_q Psi_i = -s w_q
        rate[i] = gamma * s * acc;
    }
    for k in 0..md {
        drift[k] = grad[md + k] + spec.k_gain * (x[k] - xhat[k]);
        drift[md + k] = -grad[k] + spec.k_gain * (x[md + k] - xhat[md + k]);
    }
}

pub fn symplectic_predictor_rhs(
    spec: &HamiltonianSpec,
    bank: &FeatureBank,
    weights: &[f64],
    gamma: f64,
    xhat: &[f64],
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = spec.state_dim();
    check_dim("feature bank input", n, bank.n())?;
    check_dim("weights", bank.k(), weights.len())?;
    check_dim("estimate", n, xhat.len())?;
    check_dim("measurement", n, x.len())?;
    let mut drift = vec![0.0; n];
    let mut rate = vec![0.0; bank.k()];
    symplectic_predictor_rhs_into(spec, bank, weights, gamma, xhat, x, &mut drift, &mut rate);
    Ok((drift, rate))
}
