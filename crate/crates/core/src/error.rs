use thiserror::Error;

/// Errors raised by geometry, formulas, certificates and the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("topology error: {0}")]
    Topology(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("field/manifold mismatch: {0}")]
    Mismatch(String),

    #[error("unsupported on this backend: {0}")]
    Unsupported(String),

    #[error("numerical error: {message}")]
    Numerical {
        message: String,
        /// Iterate diagnostics (iteration count, last residual, ...).
        diagnostics: Vec<(String, f64)>,
    },

    #[error("unsupported hypothesis: {0}")]
    UnsupportedHypothesis(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("missing input `{0}`")]
    MissingInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn numerical(message: impl Into<String>, diagnostics: Vec<(&str, f64)>) -> Self {
        Error::Numerical {
            message: message.into(),
            diagnostics: diagnostics
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }
}
