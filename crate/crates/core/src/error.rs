use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{what} did not converge after {iterations} iterations (last estimate {last})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        last: f64,
    },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("designer mismatch: {0}")]
    Designer(String),

    #[error("metric violation: quadratic form {0} is negative")]
    Metric(f64),

    #[error("parameter derivation failed: {0}")]
    ParameterDerivation(String),

    #[error("unbounded curvature on coordinate {0}")]
    UnboundedCurvature(usize),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
