use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0}: operators must be 2x2 or 4x4")]
    Dimension(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian (max |A - A^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("trace deviates from one by {deviation:e}")]
    Trace { deviation: f64 },

    #[error("state is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("expectation value has imaginary part {imag:e}")]
    ComplexExpectation { imag: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Hamiltonians do not commute (||[H1, H2]|| = {norm:e})")]
    NonCommuting { norm: f64 },

    #[error("state is not stationary under the stroke Hamiltonian (||[rho, H]|| = {norm:e})")]
    NotDiagonal { norm: f64 },

    #[error("integration failed at t = {time}: {source}; reduce dt (currently {dt})")]
    Integration {
        time: f64,
        dt: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
