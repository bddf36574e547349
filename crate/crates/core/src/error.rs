use thiserror::Error;

/// Errors raised by the laboratory.
///
/// The variants map onto the runner's exit codes: `Resolution` and
/// `Degenerate` are numerical-input problems (exit 3), `Config` and `Io` are
/// usage problems (exit 2), everything else is an internal or domain error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },

    #[error("field is under-resolved: high-mode energy ratio {ratio:.3e} exceeds {threshold:.1e} ({what})")]
    Resolution {
        what: String,
        ratio: f64,
        threshold: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// Whether the error stems from an unusable numerical input
    /// (under-resolution, vanishing density, degenerate denominator).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Resolution { .. } | Error::Degenerate(_) | Error::NonFinite { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
