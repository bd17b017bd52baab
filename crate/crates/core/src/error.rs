use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid kernel spec `{spec}`: {reason}")]
    KernelSpec { spec: String, reason: String },

    #[error("unsupported order nu={0} (shipped Matern orders are 1/2, 3/2, 5/2, 7/2)")]
    UnsupportedOrder(f64),

    #[error("kernel `{0}` carries asymptotic data only and has no pointwise evaluator")]
    NoEvaluator(String),

    #[error("landmarks {first} and {second} coincide")]
    CoincidentLandmarks { first: usize, second: usize },

    #[error("cometric factorization failed, near-collision ill-conditioning (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("non-finite state produced: {0}")]
    NonFinite(String),

    #[error("quadrature on [{lower:e}, {upper:e}] did not converge (error estimate {error_estimate:e})")]
    Quadrature {
        lower: f64,
        upper: f64,
        error_estimate: f64,
    },

    #[error("integrability test inconclusive: {0}")]
    Inconclusive(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
