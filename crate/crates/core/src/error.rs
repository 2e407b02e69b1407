//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any opident-core operation.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration violates a structural constraint (layer sizes,
    /// hyperparameter ranges, scenario fields).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An input vector or buffer does not match the expected shape.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An input value is out of contract (non-finite, empty, wrong arity).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Normalization only supports non-negative columns.
    #[error("unsupported range: {0}")]
    UnsupportedRange(String),

    /// A column whose maximum is zero cannot be scaled to [0, 1].
    #[error("degenerate column: {0}")]
    DegenerateColumn(String),

    /// CSV input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A linear solve or iteration produced no usable result.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The ODE integrator left the finite domain.
    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    /// A motion profile cannot reach its target under its constraints.
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    /// Every configuration in a sweep was flagged unstable.
    #[error("no valid configuration: {0}")]
    NoValidConfig(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Prefixes I/O error messages with the file path that caused them;
    /// every other variant passes through unchanged.
    pub fn with_path(self, path: &std::path::Path) -> Self {
        match self {
            Error::Io(io) => Error::Io(std::io::Error::new(
                io.kind(),
                format!("{}: {io}", path.display()),
            )),
            other => other,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        // Unwrap I/O errors so callers see one I/O variant regardless of
        // which layer hit the filesystem; everything else is a parse
        // problem with a best-effort line number.
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                _ => unreachable!("is_io_error guarantees an Io kind"),
            }
        } else {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
