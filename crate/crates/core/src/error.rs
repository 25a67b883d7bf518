use thiserror::Error;

/// Failures raised by the solvers and experiment drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("Hardy admissibility violated: {0}")]
    Admissibility(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("steady profile reached zero at r = {radius:e}")]
    Blowdown { radius: f64 },

    #[error("argument out of range: {0}")]
    Range(String),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("comparison violated at t = {time:e}, r = {radius:e}: excess {excess:e}")]
    ComparisonViolation { time: f64, radius: f64, excess: f64 },

    #[error("radius sqrt(t) = {0:e} lies outside the grid")]
    EmptyRegion(f64),

    #[error("division by a vanishing norm")]
    Division,

    #[error("angular quadrature not self-consistent: relative change {0:e}")]
    Quadrature(f64),

    #[error("eigen oracle: {0}")]
    Eigen(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
