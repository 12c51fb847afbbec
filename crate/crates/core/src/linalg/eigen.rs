//! Symmetric eigendecomposition (cyclic Jacobi) and Cholesky factorization.
//!
//! The Jacobi route is the brute-force oracle used by the verification
//! suite; it shares no code with the power-iteration fast path.

use super::{LinalgError, Matrix};

const JACOBI_MAX_SWEEPS: usize = 128;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second return value. The input is symmetrized as
/// `(A + Aᵀ)/2` before iterating, so mild asymmetry from accumulated
/// round-off is tolerated.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut m = Matrix::from_fn(n, n, |i, j| 0.5 * (a.at(i, j) + a.at(j, i)));
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.at(i, j).powi(2);
            }
        }
        if (2.0 * off).sqrt() <= tol {
            let mut pairs: Vec<(f64, usize)> =
                (0..n).map(|i| (m.at(i, i), i)).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eigenvalues"));
            let eigvals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let eigvecs = Matrix::from_fn(n, n, |r, c| v.at(r, pairs[c].1));
            return Ok((eigvals, eigvecs));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.at(p, q);
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = m.at(p, p);
                let aqq = m.at(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.at(k, p);
                    let mkq = m.at(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.at(p, k);
                    let mqk = m.at(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.at(k, p);
                    let vkq = v.at(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut off = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            off += m.at(i, j).powi(2);
        }
    }
    Err(LinalgError::EigenNoConvergence {
        off_diagonal: (2.0 * off).sqrt(),
    })
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Matrix, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.at(i, j);
            for k in 0..j {
                sum -= l.at(i, k) * l.at(j, k);
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(LinalgError::NotPositiveDefinite {
                        pivot: sum,
                        index: i,
                    });
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.at(j, j));
            }
        }
    }
    Ok(l)
}

/// Solve `A x = b` for symmetric positive-definite `A` via Cholesky.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let l = cholesky(a)?;
    let n = a.rows();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            context: "solve_spd rhs",
            left: n,
            right: b.len(),
        });
    }
    // Forward substitution L y = b.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.at(i, k) * y[k];
        }
        y[i] = sum / l.at(i, i);
    }
    // Back substitution Lᵀ x = y.
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l.at(k, i) * x[k];
        }
        x[i] = sum / l.at(i, i);
    }
    Ok(x)
}

/// Inverse of a symmetric positive-definite matrix.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix, LinalgError> {
    let n = a.rows();
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve_spd(a, &e)?;
        for i in 0..n {
            inv.set(i, j, col[i]);
        }
    }
    // Symmetrize to scrub round-off.
    Ok(Matrix::from_fn(n, n, |i, j| {
        0.5 * (inv.at(i, j) + inv.at(j, i))
    }))
}

/// `log det A` for symmetric positive-definite `A` via Cholesky.
pub fn spd_logdet(a: &Matrix) -> Result<f64, LinalgError> {
    let l = cholesky(a)?;
    Ok(2.0 * (0..a.rows()).map(|i| l.at(i, i).ln()).sum::<f64>())
}
