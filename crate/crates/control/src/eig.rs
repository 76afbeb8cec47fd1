//! Eigenvalues of a general real matrix: Householder reduction to upper
//! Hessenberg form followed by Francis double-shift QR with deflation
//! (the EISPACK `hqr` iteration, eigenvalues only).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{ensure_finite, ensure_square, tolerances, ControlError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub spectral_radius: f64,
}

impl Spectrum {
    fn from_parts(re: Vec<f64>, im: Vec<f64>) -> Self {
        let eigenvalues: Vec<Complex64> = re
            .into_iter()
            .zip(im)
            .map(|(r, i)| Complex64::new(r, i))
            .collect();
        let spectral_radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Self {
            eigenvalues,
            spectral_radius,
        }
    }

    /// Largest real part, or `-inf` for an empty spectrum.
    pub fn max_real(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Orthogonal reduction `M = Q H Q^T` with `H` upper Hessenberg.
/// Returns `(H, Q)`.
pub fn hessenberg(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    ensure_square(m, "hessenberg input")?;
    if m.nrows() == 0 {
        return Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let (q, mut h) = m.clone().hessenberg().unpack();
    for j in 0..h.ncols() {
        for i in (j + 2)..h.nrows() {
            h[(i, j)] = 0.0;
        }
    }
    Ok((h, q))
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Spectrum> {
    eigenvalues_with_cap(m, tolerances::QR_ITER_PER_DIM * m.nrows().max(1))
}

pub fn eigenvalues_with_cap(m: &DMatrix<f64>, max_iter: usize) -> Result<Spectrum> {
    ensure_square(m, "eigenvalue input")?;
    ensure_finite(m, "eigenvalue input")?;
    let nn = m.nrows();
    if nn == 0 {
        return Ok(Spectrum::from_parts(vec![], vec![]));
    }
    let (mut h, _) = hessenberg(m)?;
    let mut re = vec![0.0; nn];
    let mut im = vec![0.0; nn];
    hqr(&mut h, &mut re, &mut im, max_iter)?;
    Ok(Spectrum::from_parts(re, im))
}

fn hqr(h: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64], max_iter: usize) -> Result<()> {
    let nn = h.nrows();
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    if norm == 0.0 {
        d.iter_mut().for_each(|v| *v = 0.0);
        e.iter_mut().for_each(|v| *v = 0.0);
        return Ok(());
    }

    let mut n = nn as isize - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut x, mut y, mut w);

    while n >= 0 {
        let nu = n as usize;
        let mut l = nu;
        while l > 0 {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // one root
            d[nu] = h[(nu, nu)] + exshift;
            e[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            // two roots
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            x = h[(nu, nu)] + exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = if z != 0.0 { x - w / z } else { x + z };
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[(nu, nu)];
            y = h[(nu - 1, nu - 1)];
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];

            if iter == 10 {
                // exceptional shift
                exshift += x;
                for i in 0..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total += 1;
            if total > max_iter {
                return Err(ControlError::NumericalFailure(format!(
                    "QR iteration did not converge within {max_iter} iterations"
                )));
            }

            // two consecutive small sub-diagonal elements
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // double QR step on rows l..=n, columns m..=n
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -0.3]);
        let s = eigenvalues(&m).unwrap();
        let ev = sorted(s.eigenvalues.clone());
        assert!((ev[0].re + 0.3).abs() < 1e-15 && (ev[1].re - 0.5).abs() < 1e-15);
        assert!((s.spectral_radius - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let s = eigenvalues(&m).unwrap();
        let ev = sorted(s.eigenvalues.clone());
        assert!(ev[0].re.abs() < 1e-15 && (ev[0].im + 1.0).abs() < 1e-15);
        assert!(ev[1].re.abs() < 1e-15 && (ev[1].im - 1.0).abs() < 1e-15);
        assert!((s.spectral_radius - 1.0).abs() < 1e-15);
    }

    #[test]
    fn companion_matrix_roots() {
        // (x-1)(x-2)(x-3)(x^2+1) = x^5 - 6x^4 + 12x^3 - 12x^2 + 11x - 6
        let c = [-6.0, 11.0, -12.0, 12.0, -6.0];
        let n = 5;
        let mut m = DMatrix::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            m[(i, n - 1)] = -c[i];
        }
        let ev = sorted(eigenvalues(&m).unwrap().eigenvalues);
        let want = sorted(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
        ]);
        for (a, b) in ev.iter().zip(&want) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn jordan_block_and_zero_matrix() {
        let z = eigenvalues(&DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(z.spectral_radius, 0.0);
        let mut shift = DMatrix::zeros(6, 6);
        for i in 1..6 {
            shift[(i, i - 1)] = 1.0;
        }
        let s = eigenvalues(&shift).unwrap();
        assert!(s.spectral_radius < 1e-2);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let m = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        assert!(matches!(
            eigenvalues_with_cap(&m, 0),
            Err(ControlError::NumericalFailure(_))
        ));
    }

    #[test]
    fn hessenberg_similarity() {
        let m = DMatrix::from_fn(5, 5, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let (h, q) = hessenberg(&m).unwrap();
        assert!((&q * &h * q.transpose() - &m).amax() < 1e-12);
        for j in 0..5 {
            for i in (j + 2)..5 {
                assert_eq!(h[(i, j)], 0.0);
            }
        }
    }
}
