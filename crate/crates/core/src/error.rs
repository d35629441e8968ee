use thiserror::Error;

/// Everything that can go wrong in the library.
///
/// Variants are grouped so callers (the CLI in particular) can map them onto
/// coarse outcome classes with [`Error::kind`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("disconnected after max attempts ({attempts} resamples with r = {r})")]
    DisconnectedAfterMaxAttempts { attempts: u32, r: f64 },

    #[error("invalid transition matrix: {0}")]
    InvalidMatrix(String),

    #[error("transition matrix is reducible")]
    Reducible,

    #[error("singular linear system in {context} (residual {residual:e})")]
    Singular { context: &'static str, residual: f64 },

    #[error("ill-conditioned system in {context} (condition estimate {condition:e})")]
    IllConditioned { context: &'static str, condition: f64 },

    #[error("eigenvalue iteration did not converge after {0} steps")]
    EigenNotConverged(usize),

    #[error("projection failed to reach feasibility within {tolerance:e} (residual {residual:e})")]
    ProjectionFailed { tolerance: f64, residual: f64 },

    #[error("solver did not converge")]
    SolverNotConverged,

    #[error("unstable queue: rho = {0} >= 1")]
    Unstable(f64),

    #[error("no covering closed walk with period <= {0}")]
    NoCoveringWalk(usize),

    #[error("numerical fault: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) => ErrorKind::Usage,
            Error::InvalidGraph(_)
            | Error::DisconnectedAfterMaxAttempts { .. }
            | Error::InvalidMatrix(_)
            | Error::Reducible
            | Error::Unstable(_)
            | Error::NoCoveringWalk(_)
            | Error::Json(_) => ErrorKind::Validation,
            Error::Singular { .. }
            | Error::IllConditioned { .. }
            | Error::EigenNotConverged(_)
            | Error::ProjectionFailed { .. }
            | Error::SolverNotConverged
            | Error::Numerical(_) => ErrorKind::Numerical,
            Error::Io(_) => ErrorKind::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
