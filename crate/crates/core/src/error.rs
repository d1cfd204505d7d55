//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched vector/matrix dimensions between arguments.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The integrator left the trusted region.
    #[error("simulation blew up at t = {time:.6}: state magnitude exceeded {bound:.1e}")]
    SimulationBlowup { time: f64, bound: f64 },

    /// Too few samples for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A coupling evaluation produced a non-finite value.
    #[error("regressor evaluation produced a non-finite value at sample {sample} (node {node})")]
    Evaluation { node: usize, sample: usize },

    /// The least-squares residual exceeds the consistency tolerance: the data
    /// cannot have been generated by the declared model class.
    #[error(
        "data inconsistent with the model class for node {node}: \
         relative residual {residual:.3e} exceeds tolerance {tolerance:.1e}"
    )]
    DataInconsistent {
        node: usize,
        residual: f64,
        tolerance: f64,
    },

    /// Combinatorial size guard tripped (piece or pair enumeration).
    #[error("problem too large: {0}")]
    Scale(String),

    /// An operation was invoked outside its documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Malformed input file.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// A numerical routine failed to converge or hit its iteration cap.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Filesystem failure, annotated with the offending path.
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Bad run configuration.
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Attach a path to a raw io error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
