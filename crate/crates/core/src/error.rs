use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input failed structural validation (measure JSON, CLI specs, CSV).
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    /// A numerical routine could not meet its tolerance.
    #[error("numeric failure in {context}: achieved tolerance {achieved:e}")]
    Numeric { context: String, achieved: f64 },

    /// A circulant embedding had a negative spectrum and no fallback applied.
    #[error("embedding failure: {0}")]
    Embedding(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
