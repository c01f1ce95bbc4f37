use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("operator is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("mode map is not an isometry (max deviation {0:e})")]
    NotIsometric(f64),
    #[error("observed bins overlap on output mode {0}")]
    OverlappingBins(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("distribution is not normalised (integral {0})")]
    NotNormalized(f64),
    #[error("infeasible problem: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
