use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrecursorError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An exhaustive computation was asked for an instance above its size guard.
    #[error("size limit exceeded: {0}")]
    Size(String),
    /// A policy was driven in a way that breaks its calling protocol.
    #[error("policy contract violated: {0}")]
    Contract(String),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, PrecursorError>;

macro_rules! ensure_domain {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err($crate::error::PrecursorError::Domain(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure_domain;
