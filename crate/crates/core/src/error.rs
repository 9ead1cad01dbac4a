use thiserror::Error;

/// Errors raised by the pricing library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A wedge eigenfunction series hit its term cap before the stopping rule fired.
    #[error("series did not converge within {terms} terms (bessel argument {argument:.6e})")]
    SeriesNoConvergence { terms: usize, argument: f64 },

    /// `I_nu(x)` is not representable as an `f64`; use the log-scale variant.
    #[error("I_nu(x) overflows f64 at x = {0}; use log_bessel_i")]
    Overflow(f64),

    /// Adaptive integration ran out of subdivisions before reaching tolerance.
    #[error("quadrature failed: value {value:.6e} with error estimate {error:.3e} after {subdivisions} subdivisions")]
    QuadratureFailure {
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    /// Bracketing search found no sign change.
    #[error("no root: {0}")]
    NoRoot(String),

    /// The contract cannot be priced (for example a zero fee annuity).
    #[error("degenerate contract: {0}")]
    DegenerateContract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
