use thiserror::Error;

use crate::linalg::LinalgError;

/// Errors surfaced by the certificate pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("structure mismatch: {0}")]
    StructureMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("optimizer did not converge: {context} (last objective {last_objective})")]
    NoConvergence { context: String, last_objective: f64 },

    #[error("toeplitz symbol is effectively singular (psi_min = {psi_min})")]
    SingularSymbol { psi_min: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
