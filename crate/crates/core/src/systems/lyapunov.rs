use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadratic Lyapunov function `Q(e) = e^T P e / 2` for `e' = A e`, with
/// `mu1(r) = lambda_min r^2 / 2`, `mu2(r) = lambda_max r^2 / 2`, `rho(r) = r^2 / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertificate {
    pub p: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Frobenius norm of `A^T P + P A + I`.
    pub residual: f64,
}

impl LyapunovCertificate {
    pub fn from_matrix(a: &DMatrix<f64>) -> Result<Self> {
        let p = solve_lyapunov(a)?;
        let eig = p.clone().symmetric_eigenvalues();
        let residual = lyapunov_residual(a, &p);
        Ok(Self { lambda_min: eig.min(), lambda_max: eig.max(), p, residual })
    }

    pub fn q(&self, e: &[f64]) -> f64 {
        let e = DVector::from_column_slice(e);
        0.5 * e.dot(&(&self.p * &e))
    }

    pub fn grad_q(&self, e: &[f64]) -> DVector<f64> {
        &self.p * DVector::from_column_slice(e)
    }

    pub fn mu1(&self, r: f64) -> f64 {
        0.5 * self.lambda_min * r * r
    }

    pub fn mu2(&self, r: f64) -> f64 {
        0.5 * self.lambda_max * r * r
    }

    pub fn rho(&self, r: f64) -> f64 {
        0.5 * r * r
    }

    /// Radius `r` with `mu1(r) = v`.
    pub fn mu1_inv(&self, v: f64) -> f64 {
        (2.0 * v / self.lambda_min).sqrt()
    }
}

pub fn lyapunov_residual(a: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    (a.transpose() * p + p * a + DMatrix::<f64>::identity(n, n)).norm()
}

/// Solves `A^T P + P A = -I` as a dense system in the `n(n+1)/2` entries of
/// the upper triangle of `P`.
pub fn solve_lyapunov(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::InvalidArgument(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
    }
    let worst = a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if !(worst < 0.0) {
        return Err(Error::Solver {
            reason: format!("A is not Hurwitz (max real eigenvalue part {worst})"),
            residual: f64::NAN,
        });
    }

    let mut index = vec![vec![0usize; n]; n];
    let mut count = 0;
    for i in 0..n {
        for j in i..n {
            index[i][j] = count;
            index[j][i] = count;
            count += 1;
        }
    }
    // row (r, c), r <= c: sum_k A_kr P_kc + sum_k P_rk A_kc = -delta_rc
    let mut m = DMatrix::<f64>::zeros(count, count);
    let mut rhs = DVector::<f64>::zeros(count);
    for r in 0..n {
        for c in r..n {
            let row = index[r][c];
            for k in 0..n {
                m[(row, index[k][c])] += a[(k, r)];
                m[(row, index[r][k])] += a[(k, c)];
            }
            if r == c {
                rhs[row] = -1.0;
            }
        }
    }
    let lu = m.clone().lu();
    let mut sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Solver { reason: "singular Lyapunov system".into(), residual: f64::NAN })?;
    // one step of iterative refinement
    let corr = lu.solve(&(&rhs - &m * &sol)).unwrap_or_else(|| DVector::zeros(count));
    sol += corr;

    let p = DMatrix::from_fn(n, n, |i, j| sol[index[i][j]]);
    let residual = lyapunov_residual(a, &p);
    if !(residual <= 1e-10) {
        return Err(Error::Solver { reason: "Lyapunov residual above tolerance".into(), residual });
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_forms() {
        let p = solve_lyapunov(&(-DMatrix::<f64>::identity(2, 2))).unwrap();
        assert!((p - DMatrix::<f64>::identity(2, 2) * 0.5).amax() < 1e-15);
        let p = solve_lyapunov(&DMatrix::from_element(1, 1, -2.0)).unwrap();
        assert!((p[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unstable_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.1, 1.0, 0.0, -1.0]);
        assert!(matches!(solve_lyapunov(&a), Err(Error::Solver { .. })));
        assert!(solve_lyapunov(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn random_stable_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let r = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
            let norm = r.clone().singular_values().max();
            let a = r / norm - DMatrix::<f64>::identity(5, 5) * 1.5;
            let cert = LyapunovCertificate::from_matrix(&a).unwrap();
            assert!(cert.residual <= 1e-10);
            assert!(cert.lambda_min > 0.0);
            assert!((&cert.p - cert.p.transpose()).amax() < 1e-14);
        }
    }

    #[test]
    fn class_k_sandwich() {
        let a = crate::systems::benchmark::default_a();
        let cert = LyapunovCertificate::from_matrix(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let e: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let r = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            let q = cert.q(&e);
            assert!(cert.mu1(r) <= q * (1.0 + 1e-12) && q <= cert.mu2(r) * (1.0 + 1e-12));
        }
        assert!((cert.mu1(cert.mu1_inv(0.3)) - 0.3).abs() < 1e-14);
    }
}
