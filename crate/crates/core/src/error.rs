use alloc::string::String;

/// Errors raised by the simulator core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("input out of domain: {0}")]
    Domain(String),
    /// Vector or matrix shapes do not conform.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    /// A layer whose precoded vector vanished.
    #[error("layer {layer} has a vanishing precoded vector")]
    UnservableLayer { layer: usize },
    /// A scenario configuration field failed validation.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
