use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. `is_input` separates bad inputs (CLI exit 2)
/// from numerical/computational failures (CLI exit 3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("desk-scale operation: {0}")]
    DeskScale(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True when the error stems from user-supplied inputs rather than
    /// a failure inside the numerics.
    pub fn is_input(&self) -> bool {
        !matches!(self, Error::Solver(_) | Error::Numerical(_))
    }
}
