use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector norm {norm} is not within tolerance of 1")]
    NotUnit { norm: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid grid factorization: n_R={n_r}, n_S={n_s}, n_0={n_0} ({reason})")]
    Factorization { n_r: usize, n_s: usize, n_0: usize, reason: String },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("degenerate concentration: {0}")]
    DegenerateConcentration(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by malformed input rather than by a failed
    /// computation on valid input.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::DegenerateConcentration(_) | Error::Numerical(_) | Error::Io(_))
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
