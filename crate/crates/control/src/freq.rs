use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{hessenberg, Result, StateSpace};

/// Evaluates `C (x I - A)^{-1} B + D` at complex points. The state matrix
/// is reduced to Hessenberg form once, so each evaluation costs
/// `O(n^2 (1 + m))` instead of a dense factorization.
#[derive(Debug, Clone)]
pub struct FrequencyEvaluator {
    h: DMatrix<f64>,
    b: DMatrix<Complex64>,
    c: DMatrix<f64>,
    d: DMatrix<Complex64>,
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

impl FrequencyEvaluator {
    pub fn new(sys: &StateSpace) -> Result<Self> {
        let (h, q) = hessenberg(sys.a())?;
        let b = if sys.n_states() > 0 {
            q.transpose() * sys.b()
        } else {
            sys.b().clone()
        };
        let c = if sys.n_states() > 0 {
            sys.c() * &q
        } else {
            sys.c().clone()
        };
        Ok(Self {
            h,
            b: to_complex(&b),
            c,
            d: to_complex(sys.d()),
        })
    }

    /// Transfer matrix at the complex point `x` (`z` or `s`).
    pub fn response_at(&self, x: Complex64) -> DMatrix<Complex64> {
        let n = self.h.nrows();
        if n == 0 {
            return self.d.clone();
        }
        let mut m: DMatrix<Complex64> = self.h.map(|v| Complex64::new(-v, 0.0));
        for i in 0..n {
            m[(i, i)] += x;
        }
        let mut rhs = self.b.clone();
        let cols = rhs.ncols();
        // Elimination on an upper Hessenberg matrix: only the entry just
        // below the diagonal needs clearing, pivoting between rows k and k+1.
        for k in 0..n.saturating_sub(1) {
            if m[(k + 1, k)].norm() > m[(k, k)].norm() {
                m.swap_rows(k, k + 1);
                rhs.swap_rows(k, k + 1);
            }
            let piv = m[(k, k)];
            if piv.norm() == 0.0 {
                continue;
            }
            let f = m[(k + 1, k)] / piv;
            if f.norm() != 0.0 {
                for j in k..n {
                    let t = m[(k, j)];
                    m[(k + 1, j)] -= f * t;
                }
                for j in 0..cols {
                    let t = rhs[(k, j)];
                    rhs[(k + 1, j)] -= f * t;
                }
            }
        }
        // column-oriented back substitution on contiguous storage
        let ms = m.as_slice();
        for j in 0..cols {
            let x = &mut rhs.as_mut_slice()[j * n..(j + 1) * n];
            for i in (0..n).rev() {
                let col = &ms[i * n..i * n + i];
                let xi = x[i] / ms[i * n + i];
                x[i] = xi;
                for (xk, mk) in x[..i].iter_mut().zip(col) {
                    *xk -= mk * xi;
                }
            }
        }
        // real C times complex X as two real products
        let re = &self.c * rhs.map(|v| v.re);
        let im = &self.c * rhs.map(|v| v.im);
        let mut out = self.d.clone();
        for ((o, r), i) in out.iter_mut().zip(re.iter()).zip(im.iter()) {
            *o += Complex64::new(*r, *i);
        }
        out
    }

    /// Largest singular value of the discrete-time response at `e^{j w}`.
    pub fn sigma_max_discrete(&self, w: f64) -> f64 {
        sigma_max(&self.response_at(Complex64::from_polar(1.0, w)))
    }
}

/// Largest singular value of a complex matrix.
pub fn sigma_max(g: &DMatrix<Complex64>) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    if g.nrows() == 1 || g.ncols() == 1 {
        return g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    g.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}
