use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("generator set is empty")]
    EmptyGeneratorSet,

    #[error("point set is empty")]
    EmptyPointSet,

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("generator index {index} out of range for {count} generators")]
    GeneratorIndex { index: usize, count: usize },

    #[error("generator {index} violates {property}: {detail}")]
    GeneratorInvariant {
        index: usize,
        property: &'static str,
        detail: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("regression design is rank deficient at step {step}")]
    RankDeficient { step: usize },

    #[error("implicit driver step did not converge at step {step} (path {path}) within {iterations} iterations")]
    FixedPointDiverged {
        step: usize,
        path: usize,
        iterations: usize,
    },

    #[error("non-finite value produced at step {step}")]
    NonFinite { step: usize },

    #[error("enumeration guard: {candidates} candidate schedules exceed the limit of {limit}; use the Markovian search instead")]
    EnumerationGuard { candidates: u128, limit: u128 },

    #[error("CFL condition violated (ratio {ratio:.3} > 0.9); need at least {min_steps} time steps")]
    Cfl { ratio: f64, min_steps: usize },

    #[error("finite-difference stencil is not monotone: {0}; refine the grid")]
    NonMonotone(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

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

impl Error {
    /// Guard-type failures: the numerics refused to run as configured.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::Cfl { .. }
                | Error::NonMonotone(_)
                | Error::EnumerationGuard { .. }
                | Error::RankDeficient { .. }
                | Error::FixedPointDiverged { .. }
                | Error::NonFinite { .. }
                | Error::NotPsd { .. }
                | Error::Singular
                | Error::GeneratorInvariant { .. }
        )
    }
}
