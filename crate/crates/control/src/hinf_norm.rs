//! H-infinity norm of a stable discrete-time system by frequency sweep:
//! a uniform grid on `[0, pi]` augmented with the pole angles, followed by
//! golden-section refinement around every significant local maximum.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::freq::sigma_max;
use crate::{eigenvalues, tolerances, ControlError, FrequencyEvaluator, Result, StateSpace, TimeDomain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormOptions {
    /// Relative accuracy target.
    pub tol: f64,
    /// Uniform grid size; `None` picks `max(512, 32 n)`.
    pub grid_points: Option<usize>,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            tol: tolerances::HINF_NORM,
            grid_points: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormResult {
    pub norm: f64,
    /// Frequency in radians per sample where the peak was found.
    pub peak_frequency: f64,
}

pub fn hinf_norm_discrete(sys: &StateSpace, tol: f64) -> Result<f64> {
    let opts = NormOptions {
        tol,
        ..NormOptions::default()
    };
    Ok(hinf_norm_discrete_with(sys, &opts)?.norm)
}

pub fn hinf_norm_discrete_with(sys: &StateSpace, opts: &NormOptions) -> Result<NormResult> {
    if !matches!(sys.domain(), TimeDomain::Discrete { .. }) {
        return Err(ControlError::InvalidInput(
            "hinf_norm_discrete expects a discrete-time system".into(),
        ));
    }
    if !(opts.tol > 0.0) {
        return Err(ControlError::Parameter("tolerance must be positive".into()));
    }
    let n = sys.n_states();
    if n == 0 || sys.n_inputs() == 0 || sys.n_outputs() == 0 {
        let d = sys.d().map(|v| num_complex::Complex64::new(v, 0.0));
        return Ok(NormResult {
            norm: sigma_max(&d),
            peak_frequency: 0.0,
        });
    }
    let spec = eigenvalues(sys.a())?;
    if spec.spectral_radius >= 1.0 {
        return Err(ControlError::Unstable {
            radius: spec.spectral_radius,
        });
    }
    let eval = FrequencyEvaluator::new(sys)?;
    let pi = std::f64::consts::PI;

    let m = opts.grid_points.unwrap_or_else(|| (32 * n).max(512)).max(2);
    let mut grid: Vec<f64> = (0..m).map(|i| pi * i as f64 / (m - 1) as f64).collect();
    for z in &spec.eigenvalues {
        if z.norm() > 0.5 {
            let theta = z.im.atan2(z.re).abs();
            let width = (1.0 - z.norm()).max(1e-9);
            for off in [-width, 0.0, width] {
                let w = theta + off;
                if (0.0..=pi).contains(&w) {
                    grid.push(w);
                }
            }
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    #[cfg(feature = "parallel")]
    let values: Vec<f64> = grid.par_iter().map(|&w| eval.sigma_max_discrete(w)).collect();
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = grid.iter().map(|&w| eval.sigma_max_discrete(w)).collect();

    let (mut best_i, mut best) = (0, values[0]);
    for (i, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut peak = grid[best_i];

    let mut candidates: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let left = if i > 0 { values[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < grid.len() { values[i + 1] } else { f64::NEG_INFINITY };
            values[i] >= left && values[i] >= right && values[i] >= 0.5 * best
        })
        .collect();
    candidates.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    candidates.truncate(24);

    let refine = |i: usize| -> (f64, f64) {
        let lo = if i > 0 { grid[i - 1] } else { grid[i] };
        let hi = if i + 1 < grid.len() { grid[i + 1] } else { grid[i] };
        golden_max(&eval, lo, hi, values[i], grid[i], opts.tol)
    };
    #[cfg(feature = "parallel")]
    let refined: Vec<(f64, f64)> = candidates.par_iter().map(|&i| refine(i)).collect();
    #[cfg(not(feature = "parallel"))]
    let refined: Vec<(f64, f64)> = candidates.iter().map(|&i| refine(i)).collect();

    for (v, w) in refined {
        if v > best {
            best = v;
            peak = w;
        }
    }
    Ok(NormResult {
        norm: best,
        peak_frequency: peak,
    })
}

fn golden_max(
    eval: &FrequencyEvaluator,
    mut a: f64,
    mut b: f64,
    f_seed: f64,
    w_seed: f64,
    tol: f64,
) -> (f64, f64) {
    let (mut best, mut best_w) = (f_seed, w_seed);
    if b <= a {
        return (best, best_w);
    }
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = eval.sigma_max_discrete(c);
    let mut fd = eval.sigma_max_discrete(d);
    let stop = (tol * 1e-3).max(1e-14);
    for _ in 0..80 {
        if fc > best {
            best = fc;
            best_w = c;
        }
        if fd > best {
            best = fd;
            best_w = d;
        }
        if b - a < 1e-13 || (fc - fd).abs() <= stop * best && b - a < 1e-6 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = eval.sigma_max_discrete(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = eval.sigma_max_discrete(d);
        }
    }
    (best, best_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn disc(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> StateSpace {
        StateSpace::new(a, b, c, d, TimeDomain::Discrete { step: 1.0 }).unwrap()
    }

    #[test]
    fn pure_gain() {
        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        let s = StateSpace::gain(d, TimeDomain::Discrete { step: 1.0 }).unwrap();
        assert!((hinf_norm_discrete(&s, 1e-6).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn fir_one_plus_delay() {
        // H(z) = 1 + z^-1
        let s = disc(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        );
        let r = hinf_norm_discrete_with(&s, &NormOptions::default()).unwrap();
        assert!((r.norm - 2.0).abs() < 1e-12);
        assert_eq!(r.peak_frequency, 0.0);
    }

    #[test]
    fn first_order_lowpass() {
        // H(z) = 0.5 / (z - 0.5), peak 1 at w = 0
        let s = disc(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::zeros(1, 1),
        );
        assert!((hinf_norm_discrete(&s, 1e-6).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resonant_peak_is_found() {
        // lightly damped pair at radius 0.999, angle 1.3
        let (rho, th) = (0.999f64, 1.3f64);
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[rho * th.cos(), -rho * th.sin(), rho * th.sin(), rho * th.cos()],
        );
        let s = disc(
            a,
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            DMatrix::zeros(1, 1),
        );
        let r = hinf_norm_discrete_with(&s, &NormOptions::default()).unwrap();
        // dense local scan around the pole angle as reference
        let ev = FrequencyEvaluator::new(&s).unwrap();
        let reference = (0..=200_000)
            .map(|k| th - 0.01 + 0.02 * k as f64 / 200_000.0)
            .map(|w| ev.sigma_max_discrete(w))
            .fold(0.0, f64::max);
        assert!(((r.norm - reference) / reference).abs() < 1e-6, "{} vs {reference}", r.norm);
    }

    #[test]
    fn unstable_is_rejected() {
        let s = disc(
            DMatrix::from_element(1, 1, 1.5),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        );
        assert!(matches!(
            hinf_norm_discrete(&s, 1e-6),
            Err(ControlError::Unstable { .. })
        ));
    }
}
