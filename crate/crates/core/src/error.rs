use thiserror::Error;

/// Errors raised by basis construction, spectral calculus, norms and the
/// verification harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("modes beyond grid resolution: {0}")]
    ModesBeyondResolution(String),

    #[error("zero eigenvalue is not simple (mesh has {components} connected components)")]
    DisconnectedMesh { components: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("exponent p = {0} is not in [1, inf]")]
    InvalidExponent(f64),

    #[error("grid mismatch: expected {expected} values, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("symbol is not finite at lambda = {lambda}")]
    NonFiniteSymbol { lambda: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unresolved band: {0}")]
    UnresolvedBand(String),

    #[error("quadrature failed its error estimate: estimated relative error {estimate:e} > {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("power iteration did not converge after {iterations} steps")]
    NoConvergence { iterations: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
