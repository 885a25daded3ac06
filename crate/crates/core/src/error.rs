use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Cross-field consistency check failed.
    #[error("inconsistent configuration: {0}")]
    Inconsistent(String),

    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature for {what} did not converge (estimate {estimate:e}, error {error:e})")]
    Quadrature {
        what: String,
        estimate: f64,
        error: f64,
    },

    /// A truncated series hit its hard cap before the cutoff was met.
    #[error("series for {what} not converged after {terms} terms")]
    Series { what: String, terms: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-readable class name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } | Error::Inconsistent(_) | Error::Config(_) => "config",
            Error::Quadrature { .. } | Error::Series { .. } => "numerical",
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => "io",
        }
    }
}
