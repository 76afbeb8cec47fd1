//! Algebraic Riccati and Lyapunov equations via the matrix sign function.
//!
//! The stabilizing Riccati solution is read off the stable invariant
//! subspace of the Hamiltonian, `ker(sign(H) + I) = range [I; X]`, and then
//! polished by Newton (Kleinman) steps. If the Hamiltonian has eigenvalues on
//! or numerically near the imaginary axis the sign iteration does not
//! converge and [`ControlError::NoStabilizingSolution`] is returned; callers
//! such as gamma-iteration rely on that verdict.

use nalgebra::DMatrix;

use crate::{eigenvalues, ensure_finite, ensure_square, tolerances, ControlError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiOptions {
    pub sign_tol: f64,
    pub sign_max_iter: usize,
    pub newton_steps: usize,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            sign_tol: tolerances::SIGN_CONVERGENCE,
            sign_max_iter: tolerances::SIGN_MAX_ITER,
            newton_steps: tolerances::NEWTON_STEPS,
        }
    }
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Newton iteration with determinant scaling. Returns `sign(Z)`.
pub fn matrix_sign(z: &DMatrix<f64>, opts: &RiccatiOptions) -> Result<DMatrix<f64>> {
    ensure_square(z, "sign-function input")?;
    ensure_finite(z, "sign-function input")?;
    let n = z.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mut cur = z.clone();
    let mut scaling = true;
    for _ in 0..opts.sign_max_iter {
        let lu = cur.clone().lu();
        let log_det: f64 = (0..n).map(|i| lu.u()[(i, i)].abs().ln()).sum();
        if !log_det.is_finite() {
            return Err(ControlError::NoStabilizingSolution(
                "sign iteration hit a singular iterate".into(),
            ));
        }
        let inv = lu.try_inverse().ok_or_else(|| {
            ControlError::NoStabilizingSolution("sign iteration hit a singular iterate".into())
        })?;
        let c = if scaling { (-log_det / n as f64).exp() } else { 1.0 };
        let next = (&cur * c + inv / c) * 0.5;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::NoStabilizingSolution(
                "sign iteration diverged".into(),
            ));
        }
        let step = norm1(&(&next - &cur));
        let size = norm1(&next);
        cur = next;
        if step <= 1e-2 * size {
            scaling = false;
        }
        if step <= opts.sign_tol * size {
            return Ok(cur);
        }
    }
    Err(ControlError::NoStabilizingSolution(format!(
        "sign iteration did not converge in {} steps (eigenvalues near the imaginary axis)",
        opts.sign_max_iter
    )))
}

/// Solves `A^T X + X A + Q = 0` for Hurwitz `A`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square(a, "Lyapunov A")?;
    ensure_square(q, "Lyapunov Q")?;
    if q.nrows() != a.nrows() {
        return Err(ControlError::Dimension("Lyapunov A and Q sizes differ".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let opts = RiccatiOptions::default();
    // sign([A^T, Q; 0, -A]) = [-I, 2X; 0, I]; only the blocks E ~ A^T and
    // G ~ Q need iterating.
    let mut e = a.transpose();
    let mut g = q.clone();
    let mut scaling = true;
    for _ in 0..opts.sign_max_iter {
        let lu = e.clone().lu();
        let log_det: f64 = (0..n).map(|i| lu.u()[(i, i)].abs().ln()).sum();
        let einv = lu.try_inverse().ok_or_else(|| {
            ControlError::NumericalFailure("Lyapunov operator is singular".into())
        })?;
        let c = if scaling { (-log_det / n as f64).exp() } else { 1.0 };
        let e_next = (&e * c + &einv / c) * 0.5;
        let g_next = (&g * c + &einv * &g * einv.transpose() / c) * 0.5;
        let step = norm1(&(&e_next - &e));
        let size = norm1(&e_next);
        e = e_next;
        g = g_next;
        if step <= 1e-2 * size {
            scaling = false;
        }
        if step <= opts.sign_tol * size {
            if (&e + DMatrix::<f64>::identity(n, n)).amax() > 1e-6 {
                return Err(ControlError::NumericalFailure(
                    "Lyapunov operator is not stable".into(),
                ));
            }
            return Ok(symmetrize(&(g * 0.5)));
        }
    }
    Err(ControlError::NumericalFailure(
        "Lyapunov sign iteration did not converge".into(),
    ))
}

fn riccati_residual(
    a: &DMatrix<f64>,
    g: &DMatrix<f64>,
    q: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> DMatrix<f64> {
    a.transpose() * x + x * a - x * g * x + q
}

/// Stabilizing solution of `A^T X + X A - X G X + Q = 0` for the Hamiltonian
/// `H = [A, -G; -Q, -A^T]`, i.e. `X = Ric(H)` with `A - G X` Hurwitz.
/// `G` and `Q` may be indefinite.
pub fn ric_hamiltonian(h: &DMatrix<f64>, opts: &RiccatiOptions) -> Result<DMatrix<f64>> {
    ensure_square(h, "Hamiltonian")?;
    if h.nrows() % 2 != 0 {
        return Err(ControlError::Dimension("Hamiltonian must have even size".into()));
    }
    let n = h.nrows() / 2;
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let a = h.view((0, 0), (n, n)).into_owned();
    let g = -h.view((0, n), (n, n)).into_owned();
    let q = -h.view((n, 0), (n, n)).into_owned();

    let s = matrix_sign(h, opts)?;
    // (S + I) [I; X] = 0  =>  [S12; S22 + I] X = -[S11 + I; S21]
    let mut lhs = DMatrix::<f64>::zeros(2 * n, n);
    let mut rhs = DMatrix::<f64>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&s.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&s.view((n, n), (n, n)));
    rhs.view_mut((0, 0), (n, n)).copy_from(&s.view((0, 0), (n, n)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&s.view((n, 0), (n, n)));
    for i in 0..n {
        lhs[(n + i, i)] += 1.0;
        rhs[(i, i)] += 1.0;
    }
    let rhs = -rhs;
    let svd = lhs.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax.max(1.0)) {
        return Err(ControlError::NoStabilizingSolution(
            "stable invariant subspace is not complementary to [0; I]".into(),
        ));
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|e| ControlError::NumericalFailure(e.to_string()))?;
    let mut x = symmetrize(&x);

    let mut res_norm = riccati_residual(&a, &g, &q, &x).norm();
    for _ in 0..opts.newton_steps {
        if res_norm <= 1e-15 * (1.0 + x.norm()) {
            break;
        }
        let ak = &a - &g * &x;
        let res = riccati_residual(&a, &g, &q, &x);
        let delta = match solve_lyapunov(&ak, &res) {
            Ok(d) => d,
            Err(_) => break,
        };
        let cand = symmetrize(&(&x + delta));
        let cand_res = riccati_residual(&a, &g, &q, &cand).norm();
        if !(cand_res < res_norm) {
            break;
        }
        x = cand;
        res_norm = cand_res;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ControlError::NoStabilizingSolution("non-finite solution".into()));
    }
    let closed = &a - &g * &x;
    let spec = eigenvalues(&closed)?;
    if spec.max_real() >= 0.0 {
        return Err(ControlError::NoStabilizingSolution(format!(
            "A - G X is not Hurwitz (max real part {})",
            spec.max_real()
        )));
    }
    Ok(x)
}

/// Stabilizing solution of `A^T X + X A - X B R^{-1} B^T X + Q = 0`.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    solve_care_with(a, b, q, r, &RiccatiOptions::default())
}

pub fn solve_care_with(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &RiccatiOptions,
) -> Result<DMatrix<f64>> {
    ensure_square(a, "CARE A")?;
    ensure_square(q, "CARE Q")?;
    ensure_square(r, "CARE R")?;
    let n = a.nrows();
    let m = b.ncols();
    if b.nrows() != n || q.nrows() != n || r.nrows() != m {
        return Err(ControlError::Dimension(format!(
            "CARE expects A {n}x{n}, B {n}x{m}, Q {n}x{n}, R {m}x{m}"
        )));
    }
    for (mat, name) in [(a, "A"), (b, "B"), (q, "Q"), (r, "R")] {
        ensure_finite(mat, name)?;
    }
    if (q - q.transpose()).amax() > 1e-12 * (1.0 + q.amax()) {
        return Err(ControlError::InvalidInput("Q must be symmetric".into()));
    }
    let chol = symmetrize(r)
        .cholesky()
        .ok_or_else(|| ControlError::InvalidInput("R must be positive definite".into()))?;
    let g = b * chol.solve(&b.transpose());
    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    ric_hamiltonian(&h, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn integrator_care() {
        let x = solve_care(&scalar(0.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_scalar_care_takes_stabilizing_root() {
        let x = solve_care(&scalar(1.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        assert!((x[(0, 0)] - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!((x[(0, 0)] - 2.414214).abs() < 1e-6);
    }

    #[test]
    fn imaginary_axis_hamiltonian_is_reported() {
        // A = 0, B = 0, Q = 0: Hamiltonian is zero, no stabilizing solution.
        let r = solve_care(&scalar(0.0), &scalar(0.0), &scalar(0.0), &scalar(1.0));
        assert!(matches!(r, Err(ControlError::NoStabilizingSolution(_))));
        // Undamped oscillator with no control authority.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let b = DMatrix::zeros(2, 1);
        let q = DMatrix::identity(2, 2);
        let r = solve_care(&a, &b, &q, &scalar(1.0));
        assert!(matches!(r, Err(ControlError::NoStabilizingSolution(_))));
    }

    #[test]
    fn lyapunov_residual() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, 0.0, -3.0, 1.0, 0.5, 0.0, -2.0]);
        let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.1, 0.0, 0.1, 3.0]);
        let x = solve_lyapunov(&a, &q).unwrap();
        let res = a.transpose() * &x + &x * &a + &q;
        assert!(res.amax() < 1e-12, "{res}");
    }

    #[test]
    fn bad_r_rejected() {
        let r = solve_care(&scalar(1.0), &scalar(1.0), &scalar(1.0), &scalar(-1.0));
        assert!(matches!(r, Err(ControlError::InvalidInput(_))));
    }
}
