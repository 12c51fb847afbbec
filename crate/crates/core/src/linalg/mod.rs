//! Dense and structured matrix primitives.
//!
//! Everything downstream (network evaluation, sensitivity construction,
//! posterior optimization, Monte Carlo verification) is built on the small
//! double-precision toolkit in this module: a row-major [`Matrix`], spectral
//! and Frobenius norms, the normalized DFT, circulant/Toeplitz constructors,
//! the kernel-vectorization map, a Jacobi eigensolver, Cholesky, and seeded
//! Gaussian sampling under structured covariances.
//!
//! The toolkit is deliberately self-contained: the verification suite
//! cross-checks the fast paths (power iteration, closed-form posteriors)
//! against brute-force routes (Jacobi eigendecomposition, gradient descent),
//! so both routes must not share a linear-algebra backend.

mod complex;
mod eigen;
mod sampling;
mod structured;

pub use complex::{dft_forward, dft_inverse, dft_matrix, ComplexMatrix};
pub use eigen::{cholesky, solve_spd, spd_inverse, spd_logdet, symmetric_eigen};
pub use sampling::{sample_gaussian, CovSampler, RngSeed, StructuredCov};
pub use structured::{
    apply_banded_toeplitz, circulant_from_kernel, circulant_matvec, kernel_vec_apply,
    kernel_vec_map, kernel_vec_positions, toeplitz_from_kernel, toeplitz_matvec,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from the linear-algebra layer.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    #[error("operation requires a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("empty matrix")]
    Empty,
    #[error("power iteration did not converge after {iterations} iterations; last estimate {last_estimate}")]
    PowerIterationNoConvergence {
        iterations: usize,
        last_estimate: f64,
    },
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },
    #[error("Jacobi eigensolver did not converge (off-diagonal mass {off_diagonal})")]
    EigenNoConvergence { off_diagonal: f64 },
    #[error("kernel length {k} exceeds matrix size {h}")]
    KernelTooLong { k: usize, h: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Build from explicit dimensions and row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                context: "from_vec data length",
                left: rows * cols,
                right: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from nested rows; all rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        if rows.is_empty() {
            return Err(LinalgError::Empty);
        }
        let cols = rows[0].len();
        for r in rows {
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch {
                    context: "ragged rows",
                    left: cols,
                    right: r.len(),
                });
            }
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Row-major flat view (the `vec` convention used throughout: entry
    /// `(i, j)` sits at index `i * cols + j`).
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.at(j, i))
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        self.check_same_shape(other, "add")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        self.check_same_shape(other, "sub")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    fn check_same_shape(&self, other: &Matrix, context: &'static str) -> Result<(), LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch {
                context,
                left: self.rows * 10_000 + self.cols,
                right: other.rows * 10_000 + other.cols,
            });
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                context: "matmul inner dimension",
                left: self.cols,
                right: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.cols != x.len() {
            return Err(LinalgError::DimensionMismatch {
                context: "matvec dimension",
                left: self.cols,
                right: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| dot(self.row(i), x))
            .collect())
    }

    /// `Mᵀ x` without materializing the transpose.
    pub fn matvec_t(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.rows != x.len() {
            return Err(LinalgError::DimensionMismatch {
                context: "matvec_t dimension",
                left: self.rows,
                right: x.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += xi * m;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Result<f64, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok((0..self.rows).map(|i| self.at(i, i)).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Spectral norm via [`spectral_norm`] with the default tolerance and
    /// iteration budget. Tightly clustered top singular values (banded
    /// Toeplitz spectra sample a continuous symbol) can exhaust any power
    /// budget, so non-convergence falls back to the exact Jacobi route on
    /// the smaller Gram matrix.
    pub fn spectral_norm_default(&self) -> Result<f64, LinalgError> {
        match spectral_norm(self, POWER_ITERATION_TOL, default_power_iterations(self)) {
            Ok(v) => Ok(v),
            Err(LinalgError::PowerIterationNoConvergence { .. }) => {
                let gram = if self.rows <= self.cols {
                    self.matmul(&self.transpose())?
                } else {
                    self.transpose().matmul(self)?
                };
                let (vals, _) = symmetric_eigen(&gram)?;
                Ok(vals.last().copied().unwrap_or(0.0).max(0.0).sqrt())
            }
            Err(e) => Err(e),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Pinned relative tolerance for power iteration.
pub const POWER_ITERATION_TOL: f64 = 1e-10;

/// Default iteration budget: `100 * max(rows, cols) + 2000`. A tighter
/// `10·max + 200` budget misses moderate singular-value gaps (ratio around
/// 0.95) at this tolerance on small matrices.
pub fn default_power_iterations(m: &Matrix) -> usize {
    100 * m.rows().max(m.cols()) + 2000
}

/// Largest singular value of `m` via power iteration on `MᵀM`.
///
/// Deterministic: starts from the normalized all-ones vector and, if the
/// iteration stagnates mid-run (or lands in the null space), re-randomizes
/// once from a fixed seed. Non-convergence after `max_iter` iterations is an
/// error carrying the last estimate.
pub fn spectral_norm(m: &Matrix, tol: f64, max_iter: usize) -> Result<f64, LinalgError> {
    if m.rows == 0 || m.cols == 0 {
        return Err(LinalgError::Empty);
    }
    if !(tol > 0.0) {
        return Err(LinalgError::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if m.max_abs() == 0.0 {
        return Ok(0.0);
    }

    let n = m.cols;
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut sigma_prev = f64::NAN;
    let mut rerandomized = false;
    for iter in 0..max_iter {
        let mv = m.matvec(&v).expect("dimensions checked");
        let w = m.matvec_t(&mv).expect("dimensions checked");
        let wn = norm2(&w);
        if wn == 0.0 {
            if rerandomized {
                // Twice in the null space of MᵀM for independent starts:
                // the operator is numerically zero on the probed space.
                return Ok(0.0);
            }
            v = seeded_unit_vector(n);
            rerandomized = true;
            sigma_prev = f64::NAN;
            continue;
        }
        // Rayleigh quotient of MᵀM at unit v, plus its residual: a small
        // residual certifies the estimate even when the top singular values
        // are nearly degenerate and the iterate itself stops moving.
        let theta = dot(&v, &w).max(0.0);
        let sigma = theta.sqrt();
        let residual_sq: f64 = v
            .iter()
            .zip(&w)
            .map(|(vi, wi)| (wi - theta * vi).powi(2))
            .sum();
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
        if residual_sq.sqrt() <= tol * theta.max(f64::MIN_POSITIVE) {
            return Ok(sigma);
        }
        if sigma_prev.is_finite() && (sigma - sigma_prev).abs() <= tol * sigma.max(f64::MIN_POSITIVE)
        {
            return Ok(sigma);
        }
        // Stagnation guard: the all-ones start can sit near an invariant
        // subspace orthogonal to the top singular vector.
        if iter == max_iter / 2 && !rerandomized {
            v = seeded_unit_vector(n);
            rerandomized = true;
            sigma_prev = f64::NAN;
            continue;
        }
        sigma_prev = sigma;
    }
    Err(LinalgError::PowerIterationNoConvergence {
        iterations: max_iter,
        last_estimate: sigma_prev,
    })
}

fn seeded_unit_vector(n: usize) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5EED_F00D);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nv = norm2(&v);
    for vi in &mut v {
        *vi /= nv;
    }
    v
}

/// Frobenius norm and trace in one pass; trace requires a square matrix.
pub fn frobenius_and_trace(m: &Matrix) -> Result<(f64, f64), LinalgError> {
    let tr = m.trace()?;
    Ok((m.frobenius_norm(), tr))
}
