use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid flux: {0}")]
    InvalidFlux(String),

    #[error("flux derivative vanishes at u = {u}; blow-up profile is singular")]
    Singularity { u: f64 },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("bracketing error: no sign change on [{lo}, {hi}]")]
    Bracketing { lo: f64, hi: f64 },

    /// Carries the table of accepted `(t, value)` points up to the failure.
    #[error("integration failure at t = {t}: {reason}")]
    Integration {
        t: f64,
        reason: String,
        last_table: Vec<(f64, f64)>,
    },

    #[error("CFL violation: dt = {dt} exceeds the admissible step {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("unsupported flux: {0}")]
    UnsupportedFlux(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("quadrature did not converge: estimate {value}, error {error}")]
    Quadrature { value: f64, error: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
