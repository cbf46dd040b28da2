use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Shapes or graph handles that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),
    /// Invalid parameters (sizes, weights, sample counts).
    #[error("configuration error: {0}")]
    Config(String),
    /// Input data that violates a numerical precondition.
    #[error("data error: {0}")]
    Data(String),
    /// Evaluation outside the closed unit disk.
    #[error("domain error: {0}")]
    Domain(String),
    /// A relative error whose reference norm vanishes.
    #[error("degenerate reference: the {0} norm of the reference is zero")]
    DegenerateReference(&'static str),
    /// A loss or gradient that is NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
