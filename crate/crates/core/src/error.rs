use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not Hermitian (‖B − B†‖ = {deviation:.3e})")]
    NonHermitian { deviation: f64 },

    #[error("operator has negative spectrum (min eigenvalue {min_eigenvalue:.3e})")]
    NegativeSpectrum { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("cutoff {cutoff} too coarse for x = {x}: tail weight {tail:.3e} > tolerance {tolerance:.3e}")]
    TruncationTooCoarse {
        x: f64,
        cutoff: usize,
        tail: f64,
        tolerance: f64,
    },

    #[error("missing parameter `{0}`")]
    MissingParameter(&'static str),

    #[error("margin has the same sign at both bracket ends ({lo}, {hi})")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("output failed: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, Error>;
