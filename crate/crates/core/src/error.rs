use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("trace is {trace:.12}, expected 1")]
    TraceNotOne { trace: f64 },
    #[error("matrix is not positive semidefinite (lowest eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("eigensolver did not converge within {max_iters} iterations")]
    ConvergenceFailure { max_iters: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("measurement index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("duplicate measurement index {0}")]
    DuplicateIndex(usize),
    #[error("tomography matrix is not invertible")]
    NotInvertible,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid measurement pair ({0}, {1}); need 1 <= nu < nu' <= 4")]
    InvalidPair(usize, usize),
    #[error("likelihood decreased for {0} consecutive iterations")]
    Divergence(usize),
    #[error("fidelity {0} outside [0, 1] beyond tolerance")]
    FidelityOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("every measurement index has already been used")]
    AllUsed,
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
