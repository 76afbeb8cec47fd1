//! Bilinear (Tustin, unit-rate) map between the unit disc and the open left
//! half plane, `s = (z - 1) / (z + 1)`. The map preserves the H-infinity
//! norm and stability, and commutes with linear-fractional interconnection.

use nalgebra::DMatrix;

use crate::{ControlError, Result, StateSpace, TimeDomain};

fn inverse_of(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let lu = m.lu();
    let inv = lu
        .try_inverse()
        .ok_or_else(|| ControlError::NumericalFailure(format!("{what} is singular")))?;
    if n > 0 && inv.iter().any(|v| !v.is_finite()) {
        return Err(ControlError::NumericalFailure(format!("{what} is singular")));
    }
    Ok(inv)
}

/// Discrete `(A, B, C, D)` to the continuous equivalent. Fails when `A` has
/// an eigenvalue at `-1`, which maps to `s = infinity`.
pub fn bilinear_to_continuous(sys: &StateSpace) -> Result<StateSpace> {
    let n = sys.n_states();
    let ident = DMatrix::<f64>::identity(n, n);
    let inv = inverse_of(sys.a() + &ident, "A + I")?;
    let sq2 = std::f64::consts::SQRT_2;
    let ac = &inv * (sys.a() - &ident);
    let bc = &inv * sys.b() * sq2;
    let cc = sys.c() * &inv * sq2;
    let dc = sys.d() - sys.c() * &inv * sys.b();
    StateSpace::new(ac, bc, cc, dc, TimeDomain::Continuous)
}

/// Continuous `(A, B, C, D)` back to discrete time with the given step.
/// Fails when `A` has an eigenvalue at `+1`.
pub fn bilinear_to_discrete(sys: &StateSpace, step: f64) -> Result<StateSpace> {
    let n = sys.n_states();
    let ident = DMatrix::<f64>::identity(n, n);
    let inv = inverse_of(&ident - sys.a(), "I - A")?;
    let sq2 = std::f64::consts::SQRT_2;
    let ad = (&ident + sys.a()) * &inv;
    let bd = &inv * sys.b() * sq2;
    let cd = sys.c() * &inv * sq2;
    let dd = sys.d() + sys.c() * &inv * sys.b();
    StateSpace::new(ad, bd, cd, dd, TimeDomain::Discrete { step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FrequencyEvaluator;
    use num_complex::Complex64;

    fn example() -> StateSpace {
        StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.3]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
            DMatrix::from_row_slice(1, 2, &[0.3, -0.7]),
            DMatrix::from_element(1, 1, 0.1),
            TimeDomain::Discrete { step: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn responses_agree_under_the_map() {
        let d = example();
        let c = bilinear_to_continuous(&d).unwrap();
        let fd = FrequencyEvaluator::new(&d).unwrap();
        let fc = FrequencyEvaluator::new(&c).unwrap();
        for &w in &[0.0, 0.3, 1.0, 2.0, 3.0] {
            let z = Complex64::from_polar(1.0, w);
            let s = (z - 1.0) / (z + 1.0);
            let gd = fd.response_at(z);
            let gc = fc.response_at(s);
            assert!((gd[(0, 0)] - gc[(0, 0)]).norm() < 1e-12, "w={w}");
        }
    }

    #[test]
    fn round_trip() {
        let d = example();
        let back = bilinear_to_discrete(&bilinear_to_continuous(&d).unwrap(), 1.0).unwrap();
        assert!((back.a() - d.a()).amax() < 1e-14);
        assert!((back.b() - d.b()).amax() < 1e-14);
        assert!((back.c() - d.c()).amax() < 1e-14);
        assert!((back.d() - d.d()).amax() < 1e-14);
    }

    #[test]
    fn pole_at_minus_one_is_rejected() {
        let d = StateSpace::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.0),
            TimeDomain::Discrete { step: 1.0 },
        )
        .unwrap();
        assert!(matches!(
            bilinear_to_continuous(&d),
            Err(ControlError::NumericalFailure(_))
        ));
    }
}
