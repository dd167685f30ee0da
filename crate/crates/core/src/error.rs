use alloc::string::String;

/// Failure categories shared by every module of the core.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// Inputs violate a documented precondition (shapes, ranges, emptiness).
    #[error("validation error: {0}")]
    Validation(String),
    /// An operation was called on an object in the wrong state.
    #[error("state error: {0}")]
    State(String),
    /// Non-finite values or divergence.
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail_validation {
    ($($arg:tt)*) => {
        return Err($crate::error::Error::Validation(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail_validation;
