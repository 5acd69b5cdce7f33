use alloc::string::String;

/// Errors raised by the numeric core.
///
/// Every variant maps onto one failure category the harness reports on exit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A value outside the domain an operation is defined on (NaN, infinity).
    #[error("numeric domain error: {0}")]
    NumericDomain(String),
    /// Audio was expected to lie in [-1, 1] but did not.
    #[error("audio not normalized: {0}")]
    Normalization(String),
    /// Integration produced a non-finite state.
    #[error("integration diverged at t = {time} s (audio sample {sample:?})")]
    Divergence { time: f64, sample: Option<usize> },
    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    TrainingDivergence { epoch: usize, batch: usize },
    /// A precondition on shapes, sizes or parameters was violated.
    #[error("contract violation: {0}")]
    Contract(String),
    /// The request is valid but outside what is implemented.
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! contract {
    ($($arg:tt)*) => {
        $crate::error::Error::Contract(alloc::format!($($arg)*))
    };
}
pub(crate) use contract;
