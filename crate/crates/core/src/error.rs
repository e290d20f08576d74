use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Probe-style diagnostics (table violations, unstable constants) are data
/// and are reported inside the returned reports instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid time ladder: {0}")]
    InvalidLadder(String),
    #[error("invalid height t = {0}; heights must be positive and finite")]
    InvalidHeight(f64),
    #[error("invalid index: {0}")]
    InvalidIndex(String),
    #[error("no samples inside the requested box")]
    EmptyBox,
    #[error("coefficient field is not elliptic: {0}")]
    NotElliptic(String),
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("time not resolvable on this grid: {0}")]
    ResolutionError(String),
    #[error("empty region")]
    EmptyRegion,
    #[error("Littlewood-Paley index {j} outside resolvable range [{min}, {max}]")]
    IndexOutOfRange { j: i32, min: i32, max: i32 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("value {value} outside the declared nonlinearity range |u| <= {range}")]
    RangeExceeded { value: f64, range: f64 },
    #[error("fixed-point iteration did not converge after {iterations} iterations (last increment {increment:.3e})")]
    NonConvergence { iterations: usize, increment: f64 },
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
