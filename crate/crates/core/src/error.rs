use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// The CLI maps `Domain`, `Config`, `Unsupported`, `NonIntegrablePotential`,
/// `KernelDomain` and `Packing` to exit code 1 and the numerical failures to
/// exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("potential has no Fourier transform: {0}")]
    NonIntegrablePotential(String),

    #[error("numerical failure: {message} (residual {residual:e})")]
    NumericalFailure { message: String, residual: f64 },

    #[error("consistency failure: {message} (discrepancy {discrepancy:e})")]
    ConsistencyFailure { message: String, discrepancy: f64 },

    #[error("|G_p| >= F_p at p^2 = {p2} (F = {diagonal}, G = {pairing})")]
    KernelDomain { p2: f64, diagonal: f64, pairing: f64 },

    #[error("could not place particles: {0}")]
    Packing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalFailure { .. } | Error::ConsistencyFailure { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
