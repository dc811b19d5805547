use std::fmt;

/// Crate-wide error type.
///
/// `NonConvergence` is the only "numerical" failure; everything else is a
/// rejected input. The CLI maps this split onto exit codes (2 for bad input,
/// 3 for non-convergence).
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Parameter outside its documented range (negative mean, rho >= 1 where
    /// a pole sits, missing capacity, ...).
    InvalidParameter(String),
    /// Offered load at or above capacity: the requested equilibrium does not
    /// exist.
    Unstable(String),
    /// Argument outside the function's domain (e.g. negative time point).
    Domain(String),
    /// Operation asked of the wrong scheme or distribution variant.
    WrongScheme(String),
    /// A state vector violates its structural invariants.
    InvalidState(String),
    /// The requested limit does not exist for these parameters.
    UndefinedLimit(String),
    /// An iterative solver hit its iteration budget; carries the residual it
    /// got stuck at.
    NonConvergence { context: String, residual: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Unstable(msg) => write!(f, "unstable configuration: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::WrongScheme(msg) => write!(f, "wrong scheme: {msg}"),
            Error::InvalidState(msg) => write!(f, "invalid state: {msg}"),
            Error::UndefinedLimit(msg) => write!(f, "undefined limit: {msg}"),
            Error::NonConvergence { context, residual } => {
                write!(f, "no convergence in {context} (residual {residual:.3e})")
            }
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
