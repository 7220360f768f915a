use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum PumError {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("point {index} at {coords:?} is not covered by any patch")]
    Coverage { index: usize, coords: Vec<f64> },

    #[error(
        "local kernel matrix is too ill-conditioned (condition estimate {condition:.3e}); \
         try a larger shape parameter or fewer nodes per patch"
    )]
    Conditioning { condition: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = PumError> = std::result::Result<T, E>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(PumError::Input(msg.into()))
}
