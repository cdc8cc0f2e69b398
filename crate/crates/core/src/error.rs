use alloc::string::String;
use core::fmt;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A state or argument left the domain where the dynamics are defined
    /// (for example `x <= 0`, where `ln(x / x_inf)` is undefined).
    Domain { what: &'static str, value: f64 },
    /// Patient parameters violate their invariants.
    InvalidParams(&'static str),
    /// A function argument violates its precondition.
    InvalidArgument(&'static str),
    /// Newton iterations did not locate three distinct equilibria.
    Convergence { found: usize },
    /// The estimator window is not filled yet.
    InsufficientHistory { have: usize, need: usize },
    /// A history sample does not follow the uniform time grid.
    NonUniformSample { expected: f64, got: f64 },
    /// The integrator produced a non-positive or non-finite state.
    IntegrationAbort { step: usize, t: f64, x: f64, y: f64 },
    /// Two records do not share a time grid.
    GridMismatch { left: usize, right: usize },
    /// No preset with that name exists.
    UnknownPreset(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "domain error: {what} = {value}"),
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Convergence { found } => {
                write!(
                    f,
                    "equilibrium search located {found} distinct roots, expected 3"
                )
            }
            Error::InsufficientHistory { have, need } => {
                write!(f, "estimator needs {need} samples, history holds {have}")
            }
            Error::NonUniformSample { expected, got } => {
                write!(f, "history sample at t = {got}, expected t = {expected}")
            }
            Error::IntegrationAbort { step, t, x, y } => {
                write!(
                    f,
                    "integration aborted at step {step} (t = {t}): x = {x}, y = {y}"
                )
            }
            Error::GridMismatch { left, right } => {
                write!(f, "records have different grids ({left} vs {right} rows)")
            }
            Error::UnknownPreset(name) => write!(f, "unknown preset `{name}`"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
