use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("divergence is infinite: first argument has mass at symbol {index} where the second has none")]
    SupportViolation { index: usize },

    #[error("pmf must have full support (every mass >= {floor:e}), smallest mass is {min:e}")]
    NotFullSupport { min: f64, floor: f64 },

    #[error("symbol {symbol} is outside the alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("invalid observation matrix: {0}")]
    InvalidObservation(String),

    #[error("invalid hypothesis family: {0}")]
    InvalidFamily(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate model: outlier and typical distributions coincide")]
    DegenerateModel,

    #[error("solver did not converge: feasibility gap {gap:e} after {restarts} restarts")]
    NonConvergence { gap: f64, restarts: usize },

    #[error("enumeration needs {required} tuple evaluations, cap is {cap}")]
    CapExceeded { required: u128, cap: u128 },

    #[error("true hypothesis {0} is not a member of the hypothesis family")]
    TruthNotInFamily(String),

    #[error("degenerate exponent fit: {0}")]
    DegenerateFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
