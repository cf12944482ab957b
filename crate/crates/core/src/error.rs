use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("numeric overflow in {context} at node {node:?}")]
    NumericOverflow { context: &'static str, node: Vec<f64> },

    #[error("non-finite result in {0}")]
    NonFinite(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root is not bracketed: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracketing { f_lo: f64, f_hi: f64 },

    #[error("linear algebra: {0}")]
    LinearAlgebra(String),

    #[error("no convergence after {iterations} iterations: {context}")]
    Convergence { context: String, iterations: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate volatility {value} at index {index}")]
    DegenerateVolatility { index: usize, value: f64 },
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericOverflow { .. }
                | Error::NonFinite(_)
                | Error::Convergence { .. }
                | Error::Bracketing { .. }
                | Error::DegenerateVolatility { .. }
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
