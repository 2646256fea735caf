use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unit-ball constraint violated: full norm^N = {norm_n} exceeds 1 + {tol}")]
    ConstraintViolation { norm_n: f64, tol: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("exponent cap reached in {0}")]
    Saturated(&'static str),
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("no convergence in {what} after {iterations} iterations (defects: {detail})")]
    NoConvergence { what: &'static str, iterations: usize, detail: String },
    #[error("shooting failed for {what}: final bracket [{lo}, {hi}]")]
    Shooting { what: &'static str, lo: f64, hi: f64 },
    #[error("step size failure: {0}")]
    StepSize(String),
    #[error("profile I/O: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
