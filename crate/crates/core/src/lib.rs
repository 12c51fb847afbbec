//! PAC-Bayesian norm-based generalization certificates for small ReLU
//! networks with structured anisotropic posteriors.
//!
//! The library computes margin-based generalization certificates from a
//! single optimization template: pick a structured per-layer sensitivity
//! matrix `A_l` that dominates the network's output response to weight
//! perturbations, choose the prior variance `sigma²` so a vector-norm
//! concentration inequality enforces the perturbation condition, and take
//! the closed-form optimal posterior covariance `R*_l = (I + eta² A_lᵀA_l)⁻¹`
//! that minimizes the KL complexity term. Five sensitivity structures are
//! built in — diagonal, residual, low-rank, circulant, and banded Toeplitz —
//! each matched to a network family and a spectral-complexity measure.
//!
//! Every analytic step has an independent numerical check in [`verify`]:
//! brute-force eigendecomposition against power iteration, projected
//! gradient descent against the closed-form posterior, finite differences
//! against analytic Jacobians, and Monte Carlo estimates against the
//! concentration and perturbation inequalities.
//!
//! Module map:
//! - [`linalg`]: dense/structured matrix primitives, DFT, seeded sampling.
//! - [`networks`]: ReLU network families, margins, perturbations, Jacobians.
//! - [`sensitivity`]: the five structured sensitivity builders and the
//!   Toeplitz symbol analysis.
//! - [`pacbayes`]: the concentration functional, `sigma²` selection,
//!   optimal posteriors, and KL evaluation.
//! - [`bounds`]: spectral complexities, the beta-grid union bound, and the
//!   end-to-end certificate pipeline.
//! - [`verify`]: oracles and Monte Carlo experiments.
//! - [`cli`]: the `pacb` command-line front end.
//!
//! See the crate examples for runnable walk-throughs of each capability
//! (`cargo run --release --example certify_blobs`, etc.).

pub mod bounds;
pub mod cli;
pub mod linalg;
pub mod networks;
pub mod pacbayes;
pub mod sensitivity;
pub mod verify;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
