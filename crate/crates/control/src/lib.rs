//! Dense numerical building blocks for linear time-invariant systems.
//!
//! Everything here operates on `nalgebra::DMatrix<f64>` and is a pure
//! function of its inputs. The pieces are the ones a sampled-data
//! H-infinity design needs: the matrix exponential and zero-order-hold
//! discretization, a general real eigenvalue solver, Riccati and Lyapunov
//! solvers built on the matrix sign function, the bilinear map between the
//! unit disc and the left half plane, and a frequency-sweep H-infinity norm.

mod bilinear;
mod eig;
mod error;
mod expm;
mod freq;
mod hinf_norm;
mod riccati;
mod state_space;

pub use bilinear::{bilinear_to_continuous, bilinear_to_discrete};
pub use eig::{eigenvalues, eigenvalues_with_cap, hessenberg, Spectrum};
pub use error::{ControlError, Result};
pub use expm::matrix_exponential;
pub use freq::{sigma_max, FrequencyEvaluator};
pub use hinf_norm::{hinf_norm_discrete, hinf_norm_discrete_with, NormOptions, NormResult};
pub use riccati::{
    matrix_sign, ric_hamiltonian, solve_care, solve_care_with, solve_lyapunov, RiccatiOptions,
};
pub use state_space::{discretize_zoh, StateSpace, TimeDomain};

pub use nalgebra::DMatrix;
pub use num_complex::Complex64;

/// Default tolerances. Every routine that uses one also has a `_with`
/// variant taking an explicit value.
pub mod tolerances {
    /// Relative step size at which the sign iteration is declared converged.
    pub const SIGN_CONVERGENCE: f64 = 1e-13;
    /// Maximum sign-function iterations before reporting non-convergence.
    pub const SIGN_MAX_ITER: usize = 100;
    /// Newton refinement steps applied after the sign-function estimate.
    pub const NEWTON_STEPS: usize = 4;
    /// Default relative accuracy of the frequency-sweep H-infinity norm.
    pub const HINF_NORM: f64 = 1e-6;
    /// Iteration cap multiplier for the QR eigenvalue solver (cap = this * n).
    pub const QR_ITER_PER_DIM: usize = 100;
}

/// Frobenius norm.
pub fn fro(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Largest modulus among the eigenvalues of `m`.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.spectral_radius)
}

pub(crate) fn ensure_square(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(ControlError::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ControlError::InvalidInput(format!("{what} has non-finite entries")));
    }
    Ok(())
}
