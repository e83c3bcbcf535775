use alloc::string::String;

/// Errors raised by model registration, filtering, and optimization.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A descriptor, handle pair, or pipeline configuration is unusable.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Numeric input data is malformed (wrong length, non-finite).
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(alloc::format!($($arg)*)) };
}

macro_rules! domain_err {
    ($($arg:tt)*) => { $crate::error::Error::Domain(alloc::format!($($arg)*)) };
}

macro_rules! input_err {
    ($($arg:tt)*) => { $crate::error::Error::Input(alloc::format!($($arg)*)) };
}

pub(crate) use {config_err, domain_err, input_err};
