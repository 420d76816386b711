use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown domain `{0}` (expected one of omega90, omega135, omega270)")]
    UnknownDomain(String),

    #[error("degenerate triangle {index} (signed area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("meshes are not nested: {0}")]
    NotNested(String),

    #[error("{solver} did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { solver: &'static str, iterations: usize, residual: f64, best: Vec<f64> },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Machine-readable category, used for CLI diagnostics and exit codes.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidInput(_)
            | Error::UnknownDomain(_)
            | Error::DegenerateTriangle { .. }
            | Error::DimensionMismatch { .. }
            | Error::NotNested(_) => "input",
            Error::NotConverged { .. } | Error::Factorization(_) => "solver",
            Error::Parse { .. } | Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
