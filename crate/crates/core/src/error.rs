use thiserror::Error;

/// Errors raised by the chart computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GsrError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid numerical configuration (resolution, tolerances, brackets).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A linear solve or iteration could not produce a trustworthy answer.
    #[error("numerical failure in {context}: {detail}")]
    Numerical { context: String, detail: String },

    /// Too few usable Monte Carlo replications.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
}

impl GsrError {
    pub(crate) fn numerical(context: impl Into<String>, detail: impl Into<String>) -> Self {
        GsrError::Numerical {
            context: context.into(),
            detail: detail.into(),
        }
    }

    /// Prefix the error with where it happened, keeping its kind.
    pub fn context(self, what: &str) -> Self {
        match self {
            GsrError::Numerical { context, detail } => GsrError::Numerical {
                context: format!("{what}: {context}"),
                detail,
            },
            GsrError::Domain(m) => GsrError::Domain(format!("{what}: {m}")),
            GsrError::Configuration(m) => GsrError::Configuration(format!("{what}: {m}")),
            GsrError::InsufficientSamples(m) => {
                GsrError::InsufficientSamples(format!("{what}: {m}"))
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, GsrError>;
