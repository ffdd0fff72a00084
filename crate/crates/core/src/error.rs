use thiserror::Error;

/// Errors produced by any module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Preconditions on arguments violated (non-finite entries, shape
    /// mismatches, out-of-range parameters).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A factorization or iterative routine failed numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A system step hit a singular Jacobian/Hessian or a pole. Carries the
    /// offending state.
    #[error("singular step at {state:?}: {reason}")]
    Singular { state: Vec<f64>, reason: String },

    /// EDMD fit could not be performed (degenerate dictionary, no data).
    #[error("fit failed: {0}")]
    Fit(String),

    /// A higher-level analysis has no valid result (e.g. no eigenvalue near
    /// the requested target).
    #[error("analysis failed: {0}")]
    Analysis(String),

    /// File parse error, pointing at the offending line.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Experiment configuration rejected before any computation.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
