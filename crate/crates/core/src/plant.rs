//! Continuous-time core of the relay design diagram and its parameters.
//!
//! The relay loop is: received signal `v + alpha * A_L * u(t - L)` passes
//! the anti-alias filter `F`, is sampled every `h` seconds, processed by the
//! digital canceler `K`, held, and smoothed by the post filter `P` to give
//! the relay output `u`. For design, `v = W w` with `w` of unit energy and
//! the performance output is the cancelation error `z = v - u`.

use fdrelay_control::{eigenvalues, DMatrix, StateSpace, TimeDomain};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Scalar filter description, promoted to the I/Q pair with `I_2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterSpec {
    /// Zero-state pass-through.
    Identity,
    /// `gain / (time_constant * s + 1)`.
    FirstOrder { gain: f64, time_constant: f64 },
    /// SISO realization; `a` is n x n, `b` n x 1, `c` 1 x n, `d` scalar.
    StateSpace {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
        d: f64,
    },
}

impl FilterSpec {
    /// Realize as a 2-input, 2-output continuous system, block diagonal
    /// over the in-phase and quadrature components.
    pub fn realize(&self) -> Result<StateSpace> {
        let siso = match self {
            FilterSpec::Identity => {
                StateSpace::gain(DMatrix::identity(1, 1), TimeDomain::Continuous)?
            }
            FilterSpec::FirstOrder {
                gain,
                time_constant,
            } => {
                if !(*time_constant > 0.0) {
                    return Err(Error::Model(format!(
                        "first-order time constant must be positive, got {time_constant}"
                    )));
                }
                StateSpace::new(
                    DMatrix::from_element(1, 1, -1.0 / time_constant),
                    DMatrix::from_element(1, 1, gain / time_constant),
                    DMatrix::from_element(1, 1, 1.0),
                    DMatrix::zeros(1, 1),
                    TimeDomain::Continuous,
                )?
            }
            FilterSpec::StateSpace { a, b, c, d } => {
                let n = a.len();
                if a.iter().any(|row| row.len() != n) || b.len() != n || c.len() != n {
                    return Err(Error::Model(format!(
                        "state-space filter needs a {n}x{n}, b and c of length {n}"
                    )));
                }
                StateSpace::new(
                    DMatrix::from_fn(n, n, |i, j| a[i][j]),
                    DMatrix::from_column_slice(n, 1, b),
                    DMatrix::from_row_slice(1, n, c),
                    DMatrix::from_element(1, 1, *d),
                    TimeDomain::Continuous,
                )?
            }
        };
        Ok(siso.replicate(2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelayParams {
    /// Slow sampling period `h` in seconds.
    pub sample_period: f64,
    /// Fast-sample/fast-hold ratio `N`.
    pub fsfh_ratio: usize,
    /// Coupling path delay `L` in seconds.
    pub delay: f64,
    /// Net coupling loop gain `alpha`.
    pub coupling_gain: f64,
    /// Carrier frequency in Hz (sets the rotation `A_L`).
    pub carrier_hz: f64,
    /// Input weight `W(s)`, 2x2.
    pub weight: StateSpace,
    /// Anti-alias filter `F(s)`, 2x2.
    pub anti_alias: StateSpace,
    /// Post filter `P(s)`, 2x2.
    pub post_filter: StateSpace,
}

/// Relay parameters of the reference study: `h = 1`, `N = 16`, `L = 1`,
/// `alpha = 0.15`, `f = 10 kHz`, `F = I`, `P = 1/(0.001 s + 1)`,
/// `W = 1/(2 s + 1)`.
pub fn default_params() -> RelayParams {
    RelayParams {
        sample_period: 1.0,
        fsfh_ratio: 16,
        delay: 1.0,
        coupling_gain: 0.15,
        carrier_hz: 10_000.0,
        weight: default_weight_spec().realize().expect("valid default"),
        anti_alias: FilterSpec::Identity.realize().expect("valid default"),
        post_filter: default_post_filter_spec().realize().expect("valid default"),
    }
}

pub fn default_weight_spec() -> FilterSpec {
    FilterSpec::FirstOrder {
        gain: 1.0,
        time_constant: 2.0,
    }
}

pub fn default_post_filter_spec() -> FilterSpec {
    FilterSpec::FirstOrder {
        gain: 1.0,
        time_constant: 0.001,
    }
}

/// Rotation by `theta = -2 pi f L`. The phase is reduced modulo one cycle
/// before scaling by `2 pi`, so integer `f L` yields the identity exactly.
pub fn rotation_matrix(carrier_hz: f64, delay: f64) -> DMatrix<f64> {
    let cycles = (carrier_hz * delay).rem_euclid(1.0);
    let theta = -2.0 * std::f64::consts::PI * cycles;
    let (s, c) = if cycles == 0.0 { (0.0, 1.0) } else { theta.sin_cos() };
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

impl RelayParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(Error::Model("sample period must be positive".into()));
        }
        if self.fsfh_ratio < 1 {
            return Err(Error::Model("FSFH ratio must be at least 1".into()));
        }
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(Error::Model("coupling delay must be non-negative".into()));
        }
        if !(self.coupling_gain >= 0.0 && self.coupling_gain.is_finite()) {
            return Err(Error::Model("coupling gain must be non-negative".into()));
        }
        if !self.carrier_hz.is_finite() {
            return Err(Error::Model("carrier frequency must be finite".into()));
        }
        for (sys, name) in [
            (&self.weight, "W"),
            (&self.anti_alias, "F"),
            (&self.post_filter, "P"),
        ] {
            if sys.domain() != TimeDomain::Continuous
                || sys.n_inputs() != 2
                || sys.n_outputs() != 2
            {
                return Err(Error::Model(format!(
                    "{name} must be a continuous-time 2x2 system"
                )));
            }
        }
        if !self.weight.is_strictly_proper() {
            return Err(Error::Model("W must be strictly proper".into()));
        }
        if eigenvalues(self.weight.a())?.max_real() >= 0.0 {
            return Err(Error::Model("W must be stable".into()));
        }
        self.delay_fast_steps()?;
        Ok(())
    }

    /// `L N / h` as an integer number of fast steps.
    pub fn delay_fast_steps(&self) -> Result<usize> {
        let ratio = self.delay * self.fsfh_ratio as f64 / self.sample_period;
        let rounded = ratio.round();
        if (ratio - rounded).abs() > 1e-9 * ratio.abs().max(1.0) {
            return Err(Error::Representability { ratio });
        }
        Ok(rounded as usize)
    }

    pub fn fast_period(&self) -> f64 {
        self.sample_period / self.fsfh_ratio as f64
    }

    pub fn rotation(&self) -> DMatrix<f64> {
        rotation_matrix(self.carrier_hz, self.delay)
    }
}

/// Continuous core plus the symbolic coupling path.
///
/// `ct_core` inputs are `[w (2), u_hold (2), coupling (2)]` and outputs are
/// `[z (2), y_presample (2), u_out (2)]`. The coupling input receives
/// `alpha * A_L * u_out(t - L)`, which the lifting realizes on the fast grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridPlant {
    pub ct_core: StateSpace,
    pub delay_fast_steps: usize,
    pub rotation: DMatrix<f64>,
    pub coupling_gain: f64,
    pub sample_period: f64,
    pub fsfh_ratio: usize,
    pub params: RelayParams,
}

pub mod ports {
    use std::ops::Range;
    pub const W: Range<usize> = 0..2;
    pub const U_HOLD: Range<usize> = 2..4;
    pub const COUPLING: Range<usize> = 4..6;
    pub const Z: Range<usize> = 0..2;
    pub const Y_PRESAMPLE: Range<usize> = 2..4;
    pub const U_OUT: Range<usize> = 4..6;
}

pub fn build_hybrid_plant(params: &RelayParams) -> Result<HybridPlant> {
    params.validate()?;
    let w = &params.weight;
    let f = &params.anti_alias;
    let p = &params.post_filter;
    let (nw, nf, np) = (w.n_states(), f.n_states(), p.n_states());
    let n = nw + nf + np;
    let (iw, iff, ip) = (0, nw, nw + nf);

    let mut a = DMatrix::zeros(n, n);
    a.view_mut((iw, iw), (nw, nw)).copy_from(w.a());
    a.view_mut((iff, iw), (nf, nw)).copy_from(&(f.b() * w.c()));
    a.view_mut((iff, iff), (nf, nf)).copy_from(f.a());
    a.view_mut((ip, ip), (np, np)).copy_from(p.a());

    let mut b = DMatrix::zeros(n, 6);
    b.view_mut((iw, 0), (nw, 2)).copy_from(w.b());
    b.view_mut((ip, 2), (np, 2)).copy_from(p.b());
    b.view_mut((iff, 4), (nf, 2)).copy_from(f.b());

    let mut c = DMatrix::zeros(6, n);
    let mut d = DMatrix::zeros(6, 6);
    // z = W w - u
    c.view_mut((0, iw), (2, nw)).copy_from(w.c());
    c.view_mut((0, ip), (2, np)).copy_from(&(-p.c()));
    d.view_mut((0, 2), (2, 2)).copy_from(&(-p.d()));
    // y_presample = F (W w + coupling)
    c.view_mut((2, iw), (2, nw)).copy_from(&(f.d() * w.c()));
    c.view_mut((2, iff), (2, nf)).copy_from(f.c());
    d.view_mut((2, 4), (2, 2)).copy_from(f.d());
    // u_out = P u_hold
    c.view_mut((4, ip), (2, np)).copy_from(p.c());
    d.view_mut((4, 2), (2, 2)).copy_from(p.d());

    let ct_core = StateSpace::new(a, b, c, d, TimeDomain::Continuous)?;
    Ok(HybridPlant {
        ct_core,
        delay_fast_steps: params.delay_fast_steps()?,
        rotation: params.rotation(),
        coupling_gain: params.coupling_gain,
        sample_period: params.sample_period,
        fsfh_ratio: params.fsfh_ratio,
        params: params.clone(),
    })
}
