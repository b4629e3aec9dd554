use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge after {terms} terms (partial sum {partial})")]
    NonConvergence { partial: f64, terms: usize },

    #[error("solver did not converge: {0}")]
    SolverFailure(String),

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    #[error("boundary estimate: {0}")]
    Boundary(String),

    #[error("degenerate information matrix at {point}: {detail}")]
    DegenerateInformation { point: String, detail: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate cell {cell}: expected count {expected:e}, re-bin the table")]
    DegenerateCell { cell: usize, expected: f64 },

    #[error("invalid cdf: {0}")]
    InvalidCdf(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parse error on line(s) {lines:?}: {message}")]
    Parse { lines: Vec<usize>, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an iterative procedure (series, root solves).
    pub fn is_non_convergence(&self) -> bool {
        matches!(self, Error::NonConvergence { .. } | Error::SolverFailure(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
