//! Seeded Gaussian sampling under structured covariances.
//!
//! A sample is always `sigma · R^{1/2} · z` with `z` standard normal drawn
//! from a ChaCha stream, so identical seeds give identical vectors on every
//! platform. The covariance square root is applied through the structure
//! (scalar, low-rank shift, circulant frequency profile, dense Cholesky)
//! rather than a dense factorization wherever the structure allows it.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{cholesky, dft_forward, dft_inverse, LinalgError, Matrix};

/// Seed for a reproducible sample stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Stream for sample `index`, derived as `seed + index` so parallel
    /// sample loops stay schedule-independent.
    pub fn stream(self, index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0.wrapping_add(index))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Structured symmetric positive-definite covariance (up to the shared
/// `sigma²` scale).
#[derive(Debug, Clone)]
pub enum StructuredCov {
    /// `I`.
    Identity { dim: usize },
    /// `r · I`, `r > 0`.
    ScaledIdentity { r: f64, dim: usize },
    /// `I + (r - 1) Q Qᵀ` with orthonormal columns `Q` (dim x rank), `r > 0`.
    LowRankShift { basis: Matrix, r: f64 },
    /// Real circulant covariance with per-frequency variances `mode_vars`
    /// (indexed by the unnormalized-DFT mode); must be conjugate-symmetric
    /// (`v[j] == v[(h-j) % h]`) so the matrix is real.
    CirculantModes { mode_vars: Vec<f64> },
    /// Dense SPD matrix.
    Dense(Matrix),
}

impl StructuredCov {
    pub fn dim(&self) -> usize {
        match self {
            StructuredCov::Identity { dim } => *dim,
            StructuredCov::ScaledIdentity { dim, .. } => *dim,
            StructuredCov::LowRankShift { basis, .. } => basis.rows(),
            StructuredCov::CirculantModes { mode_vars } => mode_vars.len(),
            StructuredCov::Dense(m) => m.rows(),
        }
    }

    /// Pre-factor the covariance so repeated sampling avoids refactoring.
    pub fn sampler(&self) -> Result<CovSampler, LinalgError> {
        match self {
            StructuredCov::Identity { dim } => Ok(CovSampler::Identity { dim: *dim }),
            StructuredCov::ScaledIdentity { r, dim } => {
                if !(*r > 0.0) {
                    return Err(LinalgError::NotPositiveDefinite {
                        pivot: *r,
                        index: 0,
                    });
                }
                Ok(CovSampler::Scaled {
                    sqrt_r: r.sqrt(),
                    dim: *dim,
                })
            }
            StructuredCov::LowRankShift { basis, r } => {
                if !(*r > 0.0) {
                    return Err(LinalgError::NotPositiveDefinite {
                        pivot: *r,
                        index: 0,
                    });
                }
                Ok(CovSampler::LowRank {
                    basis: basis.clone(),
                    shift: r.sqrt() - 1.0,
                })
            }
            StructuredCov::CirculantModes { mode_vars } => {
                let h = mode_vars.len();
                for (j, &v) in mode_vars.iter().enumerate() {
                    if !(v > 0.0) {
                        return Err(LinalgError::NotPositiveDefinite { pivot: v, index: j });
                    }
                    let mirror = mode_vars[(h - j) % h];
                    if (v - mirror).abs() > 1e-9 * v.max(1.0) {
                        return Err(LinalgError::InvalidArgument(format!(
                            "circulant mode variances must be conjugate-symmetric: v[{j}]={v} vs mirror {mirror}"
                        )));
                    }
                }
                Ok(CovSampler::Circulant {
                    sqrt_modes: mode_vars.iter().map(|v| v.sqrt()).collect(),
                })
            }
            StructuredCov::Dense(m) => Ok(CovSampler::DenseChol {
                factor: cholesky(m)?,
            }),
        }
    }
}

/// Pre-factored covariance square root.
#[derive(Debug, Clone)]
pub enum CovSampler {
    Identity { dim: usize },
    Scaled { sqrt_r: f64, dim: usize },
    LowRank { basis: Matrix, shift: f64 },
    Circulant { sqrt_modes: Vec<f64> },
    DenseChol { factor: Matrix },
}

impl CovSampler {
    pub fn dim(&self) -> usize {
        match self {
            CovSampler::Identity { dim } => *dim,
            CovSampler::Scaled { dim, .. } => *dim,
            CovSampler::LowRank { basis, .. } => basis.rows(),
            CovSampler::Circulant { sqrt_modes } => sqrt_modes.len(),
            CovSampler::DenseChol { factor } => factor.rows(),
        }
    }

    /// `sigma · R^{1/2} z` for a fresh standard normal `z` from `rng`.
    pub fn draw(&self, sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
        let dim = self.dim();
        let z: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        self.apply_sqrt_scaled(sigma, &z)
    }

    fn apply_sqrt_scaled(&self, sigma: f64, z: &[f64]) -> Vec<f64> {
        match self {
            CovSampler::Identity { .. } => z.iter().map(|v| sigma * v).collect(),
            CovSampler::Scaled { sqrt_r, .. } => z.iter().map(|v| sigma * sqrt_r * v).collect(),
            CovSampler::LowRank { basis, shift } => {
                // (I + (sqrt(r) - 1) Q Qᵀ) z
                let qt_z = basis.matvec_t(z).expect("dimension fixed by dim()");
                let q_qt_z = basis.matvec(&qt_z).expect("dimension fixed by dim()");
                z.iter()
                    .zip(&q_qt_z)
                    .map(|(zi, pi)| sigma * (zi + shift * pi))
                    .collect()
            }
            CovSampler::Circulant { sqrt_modes } => {
                let h = sqrt_modes.len();
                let mut freq = dft_forward(z);
                for (f, &s) in freq.iter_mut().zip(sqrt_modes) {
                    *f *= s;
                }
                let back = dft_inverse(&freq);
                // Conjugate-symmetric spectrum, so the imaginary part is
                // round-off only.
                back.iter()
                    .map(|c: &Complex64| sigma * c.re / h as f64)
                    .collect()
            }
            CovSampler::DenseChol { factor } => {
                let n = factor.rows();
                let mut out = vec![0.0; n];
                for i in 0..n {
                    let mut acc = 0.0;
                    for k in 0..=i {
                        acc += factor.at(i, k) * z[k];
                    }
                    out[i] = sigma * acc;
                }
                out
            }
        }
    }
}

/// One seeded draw of `sigma · R^{1/2} z`, `z ~ N(0, I)`.
///
/// `sigma2 = 0` is accepted as the degenerate limit and returns the zero
/// vector; negative variances are rejected.
pub fn sample_gaussian(
    dim: usize,
    cov: &StructuredCov,
    sigma2: f64,
    seed: RngSeed,
) -> Result<Vec<f64>, LinalgError> {
    if sigma2 < 0.0 {
        return Err(LinalgError::InvalidArgument(format!(
            "sigma2 must be nonnegative, got {sigma2}"
        )));
    }
    if cov.dim() != dim {
        return Err(LinalgError::DimensionMismatch {
            context: "sample_gaussian covariance dimension",
            left: dim,
            right: cov.dim(),
        });
    }
    if sigma2 == 0.0 {
        return Ok(vec![0.0; dim]);
    }
    let sampler = cov.sampler()?;
    let mut rng = seed.rng();
    Ok(sampler.draw(sigma2.sqrt(), &mut rng))
}
