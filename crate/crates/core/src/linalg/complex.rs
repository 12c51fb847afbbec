//! Complex matrices and the normalized DFT.

use num_complex::Complex64;
use std::f64::consts::TAU;

use super::{LinalgError, Matrix};

/// Dense row-major complex matrix.
#[derive(Debug, Clone)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Complex64,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self.at(j, i).conj())
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                context: "complex matmul inner dimension",
                left: self.cols,
                right: other.rows,
            });
        }
        let mut out = ComplexMatrix::from_fn(self.rows, other.cols, |_, _| Complex64::new(0.0, 0.0));
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                for j in 0..other.cols {
                    let v = out.at(i, j) + a * other.at(k, j);
                    out.data[i * other.cols + j] = v;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec_real(&self, x: &[f64]) -> Result<Vec<Complex64>, LinalgError> {
        if self.cols != x.len() {
            return Err(LinalgError::DimensionMismatch {
                context: "complex matvec dimension",
                left: self.cols,
                right: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| self.at(i, j) * x[j])
                    .sum::<Complex64>()
            })
            .collect())
    }

    pub fn real_part(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| self.at(i, j).re)
    }

    /// Frobenius distance to the identity, used for unitarity checks.
    pub fn fro_distance_to_identity(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                acc += (self.at(i, j) - target).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn max_offdiagonal_abs(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    m = m.max(self.at(i, j).norm());
                }
            }
        }
        m
    }
}

/// Normalized DFT matrix: entry `(j, k) = exp(-2·pi·i·jk/h)/sqrt(h)`, unitary.
pub fn dft_matrix(h: usize) -> ComplexMatrix {
    let scale = 1.0 / (h as f64).sqrt();
    ComplexMatrix::from_fn(h, h, |j, k| {
        let angle = -TAU * (j as f64) * (k as f64) / (h as f64);
        Complex64::from_polar(scale, angle)
    })
}

/// Unnormalized forward DFT of a real vector: `X_k = sum_t x_t exp(-2·pi·i·kt/h)`.
///
/// Direct O(h²) evaluation; the matrices in scope stay small enough that an
/// FFT would be noise.
pub fn dft_forward(x: &[f64]) -> Vec<Complex64> {
    let h = x.len();
    (0..h)
        .map(|k| {
            (0..h)
                .map(|t| {
                    Complex64::from_polar(x[t], -TAU * (k as f64) * (t as f64) / (h as f64))
                })
                .sum()
        })
        .collect()
}

/// Unnormalized inverse DFT (no 1/h factor applied).
pub fn dft_inverse(x: &[Complex64]) -> Vec<Complex64> {
    let h = x.len();
    (0..h)
        .map(|t| {
            (0..h)
                .map(|k| {
                    x[k] * Complex64::from_polar(1.0, TAU * (k as f64) * (t as f64) / (h as f64))
                })
                .sum()
        })
        .collect()
}
