use thiserror::Error;

/// Errors raised by the local-MEM engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector lengths or basket counts disagree.
    #[error("shape error: {0}")]
    Shape(String),

    /// A request would exceed a configured size limit.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// No calibration grid point satisfied the FWER constraint.
    #[error("no feasible boundary: smallest achieved FWER {min_fwer:.4} exceeds target {target:.4}")]
    Infeasible { min_fwer: f64, target: f64 },

    /// An iterative numerical routine failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err($crate::error::Error::$variant(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
