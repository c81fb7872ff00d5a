use core::fmt;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An input violated the documented domain of an operation.
    Domain(&'static str),
    /// An iterative numeric routine failed to converge.
    NonConvergence {
        what: &'static str,
        iterations: u32,
        residual: f64,
    },
    /// A postselection target secrecy level is unreachable because it does
    /// not exceed the floor `g·ε̃`. The floor is reported in log₂ domain.
    InfeasibleTarget { log2_floor: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::NonConvergence {
                what,
                iterations,
                residual,
            } => write!(
                f,
                "{what} did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::InfeasibleTarget { log2_floor } => write!(
                f,
                "target epsilon is infeasible: it must exceed g*eps_tilde = 2^{log2_floor}"
            ),
        }
    }
}

impl core::error::Error for Error {}
