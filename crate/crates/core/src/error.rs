//! Crate-wide error type.

/// Errors produced by model construction, evaluation and post-processing.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A time argument fell outside the domain an object is defined on.
    #[error("time {t} outside domain [0, {end}]")]
    OutOfDomain { t: f64, end: f64 },

    /// An interval argument was empty or reversed.
    #[error("empty interval [{t0}, {t1}]")]
    EmptyInterval { t0: f64, t1: f64 },

    /// A constructor or solver was handed an invalid parameter.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The operation is well-defined only for a restricted configuration.
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// A ratio whose denominator is zero at the requested time.
    #[error("undefined ratio: cumulative arrival mass is zero at t = {0}")]
    UndefinedRatio(f64),

    /// Two objects that must come from the same model instance do not.
    #[error("mismatched configurations: {0}")]
    ConfigMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
