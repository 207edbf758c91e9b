use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("coordinate {0} lies outside the parametric interval [0, 1]")]
    Domain(f64),

    #[error("derivative order {0} is not supported (maximum is 2)")]
    UnsupportedOrder(usize),

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("knot vectors are not nested: {0}")]
    NotNested(String),

    #[error("level {requested} is not valid here (maximum {max})")]
    Level { requested: usize, max: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error at {path}: {msg}")]
    Io { path: String, msg: String },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            msg: err.to_string(),
        }
    }

    /// True for failures of the numerics (solver, quadrature, geometry) as
    /// opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::Solver { .. } | Error::Geometry(_) => true,
            Error::AtIteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
