use thiserror::Error;

/// Errors raised by the library.
///
/// The variants map onto the CLI exit-code contract: everything except
/// [`Error::Io`] is a domain or configuration failure (exit code 1).
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A run configuration is inconsistent (step bounds, window sizes, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// A derived object (effective flux table, ...) could not be built.
    #[error("construction error: {0}")]
    Construction(String),
    /// Malformed tabular input.
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
