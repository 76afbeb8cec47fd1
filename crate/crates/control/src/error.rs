use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    /// The Hamiltonian has (numerically) imaginary-axis eigenvalues, or its
    /// stable subspace is not a graph over the first block.
    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),
    #[error("system is not stable (spectral radius {radius})")]
    Unstable { radius: f64 },
}

pub type Result<T> = std::result::Result<T, ControlError>;
