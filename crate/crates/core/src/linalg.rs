//! Dense symmetric positive definite solves.
//!
//! nalgebra's Cholesky is unblocked, which is slow for the Gram matrices
//! built by the least-squares fits (thousands of rows). This factorization
//! works on column blocks and pushes the trailing updates through `dgemm`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const BLOCK: usize = 128;

/// Lower Cholesky factor of a symmetric positive definite matrix.
///
/// Only the lower triangle of `a` is read. The strict upper triangle of the
/// returned matrix is zeroed.
pub fn cholesky_lower(mut a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { what: "square matrix", expected: n, got: a.ncols() });
    }
    let ld = n;
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + BLOCK).min(n);
        let nb = k1 - k0;

        let mut diag = DMatrix::<f64>::zeros(nb, nb);
        for j in 0..nb {
            for i in j..nb {
                let v = a[(k0 + i, k0 + j)];
                diag[(i, j)] = v;
                diag[(j, i)] = v;
            }
        }
        let chol = nalgebra::Cholesky::new(diag).ok_or_else(|| Error::Solver {
            reason: format!("matrix not positive definite near row {k0}"),
            residual: f64::NAN,
        })?;
        let l = chol.l();
        for j in 0..nb {
            for i in 0..nb {
                a[(k0 + i, k0 + j)] = l[(i, j)];
            }
        }

        let m = n - k1;
        if m > 0 {
            let linv = l
                .solve_lower_triangular(&DMatrix::identity(nb, nb))
                .ok_or_else(|| Error::Solver { reason: "singular diagonal block".into(), residual: f64::NAN })?;
            let panel = a.view((k1, k0), (m, nb)).clone_owned();
            let base = a.as_mut_ptr();
            // SAFETY: all pointers address disjoint or read-only regions of
            // buffers that outlive the calls; strides follow column-major layout.
            unsafe {
                matrixmultiply::dgemm(
                    m,
                    nb,
                    nb,
                    1.0,
                    panel.as_ptr(),
                    1,
                    m as isize,
                    linv.as_ptr(),
                    nb as isize,
                    1,
                    0.0,
                    base.add(k1 + k0 * ld),
                    1,
                    ld as isize,
                );
                let mut r0 = k1;
                while r0 < n {
                    let r1 = (r0 + BLOCK).min(n);
                    // C[r0..r1, k1..r1] -= P[r0..r1, :] * P[k1..r1, :]^T
                    matrixmultiply::dgemm(
                        r1 - r0,
                        nb,
                        r1 - k1,
                        -1.0,
                        base.add(r0 + k0 * ld),
                        1,
                        ld as isize,
                        base.add(k1 + k0 * ld),
                        ld as isize,
                        1,
                        1.0,
                        base.add(r0 + k1 * ld),
                        1,
                        ld as isize,
                    );
                    r0 = r1;
                }
            }
        }
        k0 = k1;
    }
    for j in 1..n {
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Ok(a)
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch { what: "right-hand side rows", expected: a.nrows(), got: b.nrows() });
    }
    let l = cholesky_lower(a)?;
    let mut x = b.clone();
    if !l.solve_lower_triangular_mut(&mut x) || !l.tr_solve_lower_triangular_mut(&mut x) {
        return Err(Error::Solver { reason: "zero pivot in triangular solve".into(), residual: f64::NAN });
    }
    Ok(x)
}

pub fn spd_solve_vec(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let rhs = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = spd_solve(a, &rhs)?;
    Ok(DVector::from_column_slice(x.as_slice()))
}
