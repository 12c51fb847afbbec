//! Circulant and banded-Toeplitz constructors plus the kernel-vectorization map.

use super::{LinalgError, Matrix};

/// Circulant matrix with first column `w`: entry `(r, c) = w[(r - c) mod h]`.
///
/// Its eigenvalues are exactly the unnormalized DFT of `w`.
pub fn circulant_from_kernel(w: &[f64]) -> Matrix {
    let h = w.len();
    Matrix::from_fn(h, h, |r, c| w[(r + h - c) % h])
}

/// `circ(w) · x` without materializing the matrix (cyclic convolution).
pub fn circulant_matvec(w: &[f64], x: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let h = w.len();
    if x.len() != h {
        return Err(LinalgError::DimensionMismatch {
            context: "circulant matvec",
            left: h,
            right: x.len(),
        });
    }
    Ok((0..h)
        .map(|r| (0..h).map(|c| w[(r + h - c) % h] * x[c]).sum())
        .collect())
}

/// Banded upper Toeplitz: entry `(i, j) = w[j - i]` for `0 <= j - i <= k - 1`,
/// zero elsewhere. Errors when the kernel is longer than the matrix.
pub fn toeplitz_from_kernel(w: &[f64], h: usize) -> Result<Matrix, LinalgError> {
    let k = w.len();
    if k > h {
        return Err(LinalgError::KernelTooLong { k, h });
    }
    Ok(Matrix::from_fn(h, h, |i, j| {
        if j >= i && j - i < k {
            w[j - i]
        } else {
            0.0
        }
    }))
}

/// `toep(w) · x` without materializing the matrix.
pub fn toeplitz_matvec(w: &[f64], h: usize, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if w.len() > h {
        return Err(LinalgError::KernelTooLong { k: w.len(), h });
    }
    if x.len() != h {
        return Err(LinalgError::DimensionMismatch {
            context: "toeplitz matvec",
            left: h,
            right: x.len(),
        });
    }
    Ok((0..h)
        .map(|i| {
            w.iter()
                .enumerate()
                .take_while(|(d, _)| i + d < h)
                .map(|(d, &wd)| wd * x[i + d])
                .sum()
        })
        .collect())
}

/// Apply a size-`len` banded upper Toeplitz with generating sequence `t`
/// (bandwidth `t.len()`) to `x`, matrix-free.
pub fn apply_banded_toeplitz(t: &[f64], len: usize, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if x.len() != len {
        return Err(LinalgError::DimensionMismatch {
            context: "banded toeplitz apply",
            left: len,
            right: x.len(),
        });
    }
    if t.len() > len {
        return Err(LinalgError::KernelTooLong { k: t.len(), h: len });
    }
    Ok((0..len)
        .map(|i| {
            t.iter()
                .enumerate()
                .take_while(|(d, _)| i + d < len)
                .map(|(d, &td)| td * x[i + d])
                .sum()
        })
        .collect())
}

/// Kernel-vectorization map `P` of shape `(h², k)`: the structured sparse
/// binary matrix with `vec(toep(w)) = P · w` under the row-major `vec`
/// convention. Column `j` carries ones exactly at rows `i·(h+1) + j` for
/// `i = 0..h-j`, so `PᵀP = diag(h - j)`.
pub fn kernel_vec_map(h: usize, k: usize) -> Result<Matrix, LinalgError> {
    if k > h {
        return Err(LinalgError::KernelTooLong { k, h });
    }
    let mut p = Matrix::zeros(h * h, k);
    for j in 0..k {
        for i in 0..h - j {
            p.set(i * (h + 1) + j, j, 1.0);
        }
    }
    Ok(p)
}

/// Row indices of the ones in column `j` of [`kernel_vec_map`], without
/// materializing `P`.
pub fn kernel_vec_positions(h: usize, j: usize) -> impl Iterator<Item = usize> {
    (0..h - j).map(move |i| i * (h + 1) + j)
}

/// `P · u` matrix-free: embeds a length-`k` kernel into the vectorized
/// banded Toeplitz weight layout (length `h²`).
pub fn kernel_vec_apply(h: usize, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; h * h];
    for (j, &uj) in u.iter().enumerate() {
        for r in kernel_vec_positions(h, j) {
            out[r] = uj;
        }
    }
    out
}
