use thiserror::Error;

/// Errors raised by the library. Numerical failures carry enough context to
/// be reported verbatim by callers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter-domain error: {0}")]
    ParameterDomain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("loss-domain error: {0}")]
    LossDomain(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("data-domain error: {0}")]
    Domain(String),
    #[error("convergence error in {context}: final gap {gap:e}")]
    Convergence { context: String, gap: f64 },
    #[error("unsupported projection: {0}")]
    UnsupportedProjection(String),
    #[error("decomposition error: {0}")]
    Decomposition(String),
    #[error("underflow error: {0}")]
    Underflow(String),
    #[error("embedding error: {0}")]
    Embedding(String),
    #[error("model/family mismatch: {0}")]
    ModelMismatch(String),
    #[error("estimator failed at replicate {replicate}: {source}")]
    Replicate {
        replicate: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn convergence(context: impl Into<String>, gap: f64) -> Self {
        Error::Convergence {
            context: context.into(),
            gap,
        }
    }
}
