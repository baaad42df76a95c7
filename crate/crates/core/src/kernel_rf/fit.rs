//! Least-squares weight fits on grids, used to measure how well a feature
//! bank can represent a target function.

use nalgebra::{Complex, DMatrix, DVector};

use super::features::{FeatureBank, LinearFeatures};
use super::kernel::KernelVariant;
use crate::error::{check_dim, Error, Result};
use crate::linalg::spd_solve;

type C64 = Complex<f64>;

/// Tensor grid `[lo, hi]^n` with `per_dim` evenly spaced points per axis.
/// Point `idx` has axis-`k` coordinate index `(idx / per_dim^k) % per_dim`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductGrid {
    pub lo: f64,
    pub hi: f64,
    pub per_dim: usize,
    pub n: usize,
}

impl ProductGrid {
    pub fn new(lo: f64, hi: f64, per_dim: usize, n: usize) -> Result<Self> {
        if per_dim < 2 || !(hi > lo) || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid needs per_dim >= 2, hi > lo and n >= 1 (got {per_dim}, [{lo}, {hi}], n = {n})"
            )));
        }
        Ok(Self { lo, hi, per_dim, n })
    }

    /// Cube of half-width `radius` centred at the origin.
    pub fn cube(radius: f64, per_dim: usize, n: usize) -> Result<Self> {
        Self::new(-radius, radius, per_dim, n)
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.per_dim - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.per_dim.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis(&self, k: usize) -> f64 {
        self.lo + self.spacing() * k as f64
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut rest = idx;
        (0..self.n)
            .map(|_| {
                let k = rest % self.per_dim;
                rest /= self.per_dim;
                self.axis(k)
            })
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// Max over the points of `|Psi(x) weights - target(x)|_2`.
pub fn empirical_sup_error(
    features: &dyn LinearFeatures,
    weights: &[f64],
    target: &dyn Fn(&[f64], &mut [f64]),
    points: &[Vec<f64>],
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation grid".into()));
    }
    check_dim("weights", features.feature_dim(), weights.len())?;
    let d = features.output_dim();
    let mut fx = vec![0.0; d];
    let mut hx = vec![0.0; d];
    let mut worst = 0.0f64;
    for x in points {
        check_dim("grid point", features.input_dim(), x.len())?;
        features.apply(x, weights, &mut fx);
        target(x, &mut hx);
        let e = fx.iter().zip(&hx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        worst = worst.max(e);
    }
    Ok(worst)
}

/// [`empirical_sup_error`] over every point of a product grid, using
/// incremental phase tables instead of one cosine per feature and point.
pub fn grid_sup_error(
    bank: &FeatureBank,
    weights: &[f64],
    target: &dyn Fn(&[f64], &mut [f64]),
    grid: &ProductGrid,
) -> Result<f64> {
    check_dim("grid dimension", bank.n(), grid.n)?;
    check_dim("weights", bank.feature_dim(), weights.len())?;
    let (d, d1) = (bank.d(), bank.d1());
    let npts = grid.len();
    let mut pred = vec![vec![0.0; npts]; d];
    let mut z = vec![0.0; npts];
    for i in 0..bank.k() {
        // the block output M_i alpha_i does not depend on x
        let alpha = DVector::from_column_slice(&weights[i * d1..(i + 1) * d1]);
        let v = bank.block_output(i) * alpha;
        grid_activations(bank, i, grid, &mut z);
        for (row, vc) in pred.iter_mut().zip(v.iter()) {
            for (o, zp) in row.iter_mut().zip(&z) {
                *o += zp * vc;
            }
        }
    }
    let targets = channel_targets(target, grid, d);
    let worst = (0..npts)
        .map(|p| (0..d).map(|c| (pred[c][p] - targets[c][p]).powi(2)).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    Ok(worst)
}

// target values split by output channel, in grid order
fn channel_targets(target: &dyn Fn(&[f64], &mut [f64]), grid: &ProductGrid, d: usize) -> Vec<Vec<f64>> {
    let npts = grid.len();
    let mut out = vec![vec![0.0; npts]; d];
    let mut hx = vec![0.0; d];
    for p in 0..npts {
        target(&grid.point(p), &mut hx);
        for c in 0..d {
            out[c][p] = hx[c];
        }
    }
    out
}

/// Ridge-regularized least squares from a dense design matrix.
/// The ridge is relative: `ridge * trace(G) / D` is added to the Gram diagonal.
pub fn least_squares_weights(
    features: &dyn LinearFeatures,
    target: &dyn Fn(&[f64], &mut [f64]),
    points: &[Vec<f64>],
    ridge: f64,
) -> Result<DVector<f64>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty fitting grid".into()));
    }
    let d = features.output_dim();
    let dim = features.feature_dim();
    let mut z = DMatrix::zeros(points.len() * d, dim);
    let mut y = DVector::zeros(points.len() * d);
    let mut hx = vec![0.0; d];
    for (p, x) in points.iter().enumerate() {
        check_dim("grid point", features.input_dim(), x.len())?;
        let m = features.matrix(x);
        z.rows_mut(p * d, d).copy_from(&m);
        target(x, &mut hx);
        y.rows_mut(p * d, d).copy_from_slice(&hx);
    }
    let mut g = z.transpose() * &z;
    add_ridge(&mut g, ridge);
    let rhs = z.transpose() * y;
    let sol = spd_solve(g, &DMatrix::from_column_slice(dim, 1, rhs.as_slice()))?;
    Ok(DVector::from_column_slice(sol.as_slice()))
}

fn add_ridge(g: &mut DMatrix<f64>, ridge: f64) {
    let dim = g.nrows();
    let lam = ridge * g.trace() / dim.max(1) as f64;
    for i in 0..dim {
        g[(i, i)] += lam;
    }
}

/// Least-squares fit over a product grid.
///
/// For decomposable banks with `B = I` the Gram matrix is computed in closed
/// form (geometric sums along each axis), which keeps fits with thousands of
/// features and tens of thousands of grid points cheap. Other banks fall
/// back to [`least_squares_weights`].
pub fn grid_fit(
    bank: &FeatureBank,
    target: &dyn Fn(&[f64], &mut [f64]),
    grid: &ProductGrid,
    ridge: f64,
) -> Result<DVector<f64>> {
    check_dim("grid dimension", bank.n(), grid.n)?;
    let identity_factor = match &bank.spec().variant {
        KernelVariant::Decomposable { b, .. } => {
            b.is_square() && (b - DMatrix::<f64>::identity(b.nrows(), b.ncols())).amax() == 0.0
        }
        _ => false,
    };
    if !identity_factor {
        return least_squares_weights(bank, target, &grid.points(), ridge);
    }

    let k = bank.k();
    let d = bank.d();
    let mut g = analytic_gram(bank, grid);
    add_ridge(&mut g, ridge);

    // right-hand sides: r[i, c] = sum_x z_i(x) h_c(x)
    let npts = grid.len();
    let targets = channel_targets(target, grid, d);
    let mut rhs = DMatrix::zeros(k, d);
    let mut z = vec![0.0; npts];
    for i in 0..k {
        grid_activations(bank, i, grid, &mut z);
        for (c, y) in targets.iter().enumerate() {
            rhs[(i, c)] = z.iter().zip(y).map(|(a, b)| a * b).sum();
        }
    }
    let sol = spd_solve(g, &rhs)?;
    // weights are laid out feature-major: alpha_i in R^d
    let mut alpha = DVector::zeros(k * d);
    for i in 0..k {
        for c in 0..d {
            alpha[i * d + c] = sol[(i, c)];
        }
    }
    Ok(alpha)
}

/// `sqrt(2) cos(w_i^T x + b_i)` at every grid point, in grid order.
pub fn grid_activations(bank: &FeatureBank, i: usize, grid: &ProductGrid, out: &mut [f64]) {
    let n = grid.n;
    let m = grid.per_dim;
    let w = bank.frequency(i);
    let (mut re0, mut im0) = (vec![0.0; m], vec![0.0; m]);
    for k in 0..m {
        let (s, c) = (w[0] * grid.axis(k)).sin_cos();
        re0[k] = std::f64::consts::SQRT_2 * c;
        im0[k] = std::f64::consts::SQRT_2 * s;
    }
    let tables: Vec<Vec<C64>> =
        (1..n).map(|a| (0..m).map(|k| C64::from_polar(1.0, w[a] * grid.axis(k))).collect()).collect();
    // prefix[a] = e^{ib} * prod over outer axes >= a + 1 of the current entries
    let outer = n - 1;
    let mut idx = vec![0usize; outer];
    let mut prefix = vec![C64::new(0.0, 0.0); outer + 1];
    prefix[outer] = C64::from_polar(1.0, bank.phase_offset(i));
    for a in (0..outer).rev() {
        prefix[a] = prefix[a + 1] * tables[a][0];
    }
    for chunk in out.chunks_exact_mut(m) {
        let p = prefix[0];
        for ((o, r), q) in chunk.iter_mut().zip(&re0).zip(&im0) {
            *o = p.re * r - p.im * q;
        }
        let mut a = 0;
        while a < outer {
            idx[a] += 1;
            if idx[a] < m {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
        if a == outer {
            break;
        }
        for b in (0..=a).rev() {
            prefix[b] = prefix[b + 1] * tables[b][idx[b]];
        }
    }
}

/// `G_ij = sum_x z_i(x) z_j(x)` over the grid, lower triangle only.
///
/// With grid centre `c`, each axis sum of `e^{i u x}` is `e^{i u c}` times the
/// Dirichlet kernel `sin(m u h / 2) / sin(u h / 2)`, so every entry reduces to
/// products of precomputed sines and cosines.
fn analytic_gram(bank: &FeatureBank, grid: &ProductGrid) -> DMatrix<f64> {
    const TINY: f64 = 3e-7;
    let k = bank.k();
    let n = grid.n;
    let m = grid.per_dim as f64;
    let half = 0.5 * grid.spacing();
    let centre = 0.5 * (grid.lo + grid.hi);

    let mut cb = vec![0.0; k];
    let mut sb = vec![0.0; k];
    // axis-major tables: [a * k + i]
    let (mut big_s, mut big_c) = (vec![0.0; n * k], vec![0.0; n * k]);
    let (mut sm_s, mut sm_c) = (vec![0.0; n * k], vec![0.0; n * k]);
    for i in 0..k {
        let w = bank.frequency(i);
        let shifted = bank.phase_offset(i) + centre * w.iter().sum::<f64>();
        (sb[i], cb[i]) = shifted.sin_cos();
        for a in 0..n {
            (big_s[a * k + i], big_c[a * k + i]) = (m * w[a] * half).sin_cos();
            (sm_s[a * k + i], sm_c[a * k + i]) = (w[a] * half).sin_cos();
        }
    }

    // (numerator, denominator) of the Dirichlet kernel, switching to the
    // l'Hopital limit m cos(m v) / cos(v) near its removable singularities
    let dirichlet = |num: f64, den: f64, cnum: f64, cden: f64| -> (f64, f64) {
        if den.abs() > TINY {
            (num, den)
        } else {
            (m * cnum, cden)
        }
    };

    let mut g = DMatrix::zeros(k, k);
    let mut num_d = vec![0.0; k];
    let mut den_d = vec![0.0; k];
    let mut num_s = vec![0.0; k];
    let mut den_s = vec![0.0; k];
    for j in 0..k {
        for v in [&mut num_d, &mut den_d, &mut num_s, &mut den_s] {
            v[j..].iter_mut().for_each(|x| *x = 1.0);
        }
        for a in 0..n {
            let off = a * k;
            let (sj, cj) = (big_s[off + j], big_c[off + j]);
            let (tj, dj) = (sm_s[off + j], sm_c[off + j]);
            for i in j..k {
                let (si, ci) = (big_s[off + i], big_c[off + i]);
                let (ti, di) = (sm_s[off + i], sm_c[off + i]);
                // difference frequency w_i - w_j
                let dd = dirichlet(si * cj - ci * sj, ti * dj - di * tj, ci * cj + si * sj, di * dj + ti * tj);
                // sum frequency w_i + w_j
                let ds = dirichlet(si * cj + ci * sj, ti * dj + di * tj, ci * cj - si * sj, di * dj - ti * tj);
                num_d[i] *= dd.0;
                den_d[i] *= dd.1;
                num_s[i] *= ds.0;
                den_s[i] *= ds.1;
            }
        }
        let (cbj, sbj) = (cb[j], sb[j]);
        let col = &mut g.column_mut(j);
        for i in j..k {
            let cos_diff = cb[i] * cbj + sb[i] * sbj;
            let cos_sum = cb[i] * cbj - sb[i] * sbj;
            col[i] = cos_diff * num_d[i] / den_d[i] + cos_sum * num_s[i] / den_s[i];
        }
    }
    g
}
