//! Discrete-time H-infinity output-feedback synthesis.
//!
//! The discrete plant is mapped to continuous time with `s = (z-1)/(z+1)`,
//! which preserves the H-infinity norm and maps stability regions onto each
//! other. There the central controller is built from the two-Riccati
//! formulas for a general `D11`, after loop-shifting away `D22` and
//! normalizing `D12 = [0; I]`, `D21 = [0, I]`. The controller is then mapped
//! back to the unit disc.

use fdrelay_control::{
    bilinear_to_continuous, bilinear_to_discrete, eigenvalues, hinf_norm_discrete, ric_hamiltonian,
    ControlError, DMatrix, RiccatiOptions, StateSpace, TimeDomain,
};
use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::lift::{closed_loop, lift, GeneralizedPlant};
use crate::plant::{build_hybrid_plant, RelayParams};
use crate::{Error, Result};

/// Perturbation added to a rank-deficient `D12` or `D21`.
pub const RANK_REGULARIZATION: f64 = 1e-8;
/// Default relative bisection tolerance.
pub const DEFAULT_TOL: f64 = 1e-3;
const MAX_DOUBLINGS: usize = 60;
const PSD_TOL: f64 = 1e-9;
/// Relative slack allowed between a probe's certified norm and its level.
pub const CERTIFY_SLACK: f64 = 5e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalController {
    pub k: StateSpace,
    pub gamma_achieved: f64,
    pub gamma_certified: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub gamma: f64,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub controller: DigitalController,
    pub gamma_min: f64,
    pub gamma_lower: f64,
    pub bisection_trace: Vec<TraceEntry>,
    /// Spectral radius of the closed-loop state matrix.
    pub spectral_radius: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Infeasible {
    /// `gamma` does not exceed the lower bound set by `D11`.
    Feedthrough { bound: f64 },
    XRiccati(String),
    XNotPsd { min_eig: f64 },
    YRiccati(String),
    YNotPsd { min_eig: f64 },
    Coupling { rho: f64 },
    ClosedLoopUnstable { radius: f64 },
    /// The unregularized closed loop exceeds the level.
    Certificate { norm: f64 },
    Numerical(String),
}

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Infeasible::Feedthrough { bound } => {
                write!(f, "gamma below feedthrough bound {bound:.6e}")
            }
            Infeasible::XRiccati(m) => write!(f, "X Riccati has no stabilizing solution: {m}"),
            Infeasible::XNotPsd { min_eig } => {
                write!(f, "X not positive semidefinite (min eigenvalue {min_eig:.3e})")
            }
            Infeasible::YRiccati(m) => write!(f, "Y Riccati has no stabilizing solution: {m}"),
            Infeasible::YNotPsd { min_eig } => {
                write!(f, "Y not positive semidefinite (min eigenvalue {min_eig:.3e})")
            }
            Infeasible::Coupling { rho } => {
                write!(f, "coupling condition violated: rho(XY) = {rho:.6e} >= gamma^2")
            }
            Infeasible::ClosedLoopUnstable { radius } => {
                write!(f, "closed loop not Schur stable (spectral radius {radius:.6})")
            }
            Infeasible::Certificate { norm } => {
                write!(f, "closed-loop norm {norm:.6e} exceeds gamma")
            }
            Infeasible::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum GammaOutcome {
    Feasible(StateSpace),
    Infeasible(Infeasible),
}

/// Continuous-time normalized problem data, independent of `gamma`.
#[derive(Debug, Clone)]
pub struct PreparedPlant {
    original: GeneralizedPlant,
    step: f64,
    a: DMatrix<f64>,
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
    c1: DMatrix<f64>,
    c2: DMatrix<f64>,
    d11: DMatrix<f64>,
    d22: DMatrix<f64>,
    /// `u = u_scale * u_normalized`
    u_scale: DMatrix<f64>,
    /// `y_normalized = y_scale * y`
    y_scale: DMatrix<f64>,
    pub warnings: Vec<String>,
}

fn orthonormal_complement(u: &DMatrix<f64>) -> DMatrix<f64> {
    let n = u.nrows();
    let k = u.ncols();
    if k >= n {
        return DMatrix::zeros(n, 0);
    }
    let proj = DMatrix::<f64>::identity(n, n) - u * u.transpose();
    let eig = SymmetricEigen::new(proj);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut out = DMatrix::zeros(n, n - k);
    for (col, &i) in idx.iter().take(n - k).enumerate() {
        out.set_column(col, &eig.eigenvectors.column(i));
    }
    out
}

/// Thin SVD `m = U diag(s) V^T` with a regularized smallest singular value.
fn regular_svd(
    m: &DMatrix<f64>,
    what: &str,
    warnings: &mut Vec<String>,
) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let floor = RANK_REGULARIZATION * smax.max(1.0);
    let mut s: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let mut bumped = false;
    for v in s.iter_mut() {
        if *v < floor {
            *v = floor;
            bumped = true;
        }
    }
    if bumped {
        warnings.push(format!(
            "{what} is rank deficient; regularized with epsilon = {RANK_REGULARIZATION:e}"
        ));
    }
    (u, s, vt.transpose())
}

impl PreparedPlant {
    pub fn new(g: &GeneralizedPlant) -> Result<Self> {
        let step = g.step();
        let (m1, m2, p1, p2) = (g.n_w, g.n_u, g.n_z, g.n_y);
        if m2 == 0 || p2 == 0 {
            return Err(Error::Synthesis("plant has no control or measurement channel".into()));
        }
        if p1 < m2 || m1 < p2 {
            return Err(Error::Synthesis(format!(
                "need dim z >= dim u and dim w >= dim y, got z={p1}, u={m2}, w={m1}, y={p2}"
            )));
        }
        let mut warnings = Vec::new();
        let mut disc = g.system.clone();
        let n = disc.n_states();
        // a pole at z = -1 has no image under the bilinear map
        let sing = (disc.a() + DMatrix::<f64>::identity(n, n)).singular_values();
        if n > 0 && sing.min() < 1e-10 * sing.max().max(1.0) {
            let (a, b, c, d) = disc.clone().into_parts();
            let a = a * (1.0 - RANK_REGULARIZATION);
            disc = StateSpace::new(a, b, c, d, disc.domain())?;
            warnings.push("plant pole at z = -1; state matrix contracted by 1 - 1e-8".into());
        }
        let cont = bilinear_to_continuous(&disc)?;
        let (a, b, c, d) = cont.into_parts();
        let b1 = b.columns(0, m1).into_owned();
        let b2 = b.columns(m1, m2).into_owned();
        let c1 = c.rows(0, p1).into_owned();
        let c2 = c.rows(p1, p2).into_owned();
        let d11 = d.view((0, 0), (p1, m1)).into_owned();
        let d12 = d.view((0, m1), (p1, m2)).into_owned();
        let d21 = d.view((p1, 0), (p2, m1)).into_owned();
        let d22 = d.view((p1, m1), (p2, m2)).into_owned();

        // D12 = U S V^T;  Theta = [U_perp, U]
        let (u12, s12, v12) = regular_svd(&d12, "D12", &mut warnings);
        let mut theta = DMatrix::zeros(p1, p1);
        theta
            .view_mut((0, 0), (p1, p1 - m2))
            .copy_from(&orthonormal_complement(&u12));
        theta.view_mut((0, p1 - m2), (p1, m2)).copy_from(&u12);
        let u_scale = &v12 * DMatrix::from_diagonal(&s12.iter().map(|v| 1.0 / v).collect::<Vec<_>>().into());

        // D21 = U S V^T;  Psi = [V_perp, V]
        let (u21, s21, v21) = regular_svd(&d21, "D21", &mut warnings);
        let mut psi = DMatrix::zeros(m1, m1);
        psi.view_mut((0, 0), (m1, m1 - p2))
            .copy_from(&orthonormal_complement(&v21));
        psi.view_mut((0, m1 - p2), (m1, p2)).copy_from(&v21);
        let y_scale = DMatrix::from_diagonal(&s21.iter().map(|v| 1.0 / v).collect::<Vec<_>>().into())
            * u21.transpose();

        let b1s = &b1 * &psi;
        let b2s = &b2 * &u_scale;
        let c1s = theta.transpose() * &c1;
        let c2s = &y_scale * &c2;
        let d11s = theta.transpose() * &d11 * &psi;
        Ok(Self {
            original: g.clone(),
            step,
            a,
            b1: b1s,
            b2: b2s,
            c1: c1s,
            c2: c2s,
            d11: d11s,
            d22,
            u_scale,
            y_scale,
            warnings,
        })
    }

    pub fn original(&self) -> &GeneralizedPlant {
        &self.original
    }

    /// Largest `gamma` that the feedthrough alone rules out.
    pub fn feedthrough_bound(&self) -> f64 {
        let (m1, p1) = (self.b1.ncols(), self.c1.nrows());
        let (m2, p2) = (self.b2.ncols(), self.c2.nrows());
        let top = self.d11.rows(0, p1 - m2).into_owned();
        let left = self.d11.columns(0, m1 - p2).into_owned();
        spectral_norm(&top).max(spectral_norm(&left))
    }

    /// Central controller at level `gamma`, or the first failed condition.
    /// A controller is accepted only if the closed loop with the original
    /// (unregularized) plant is Schur stable with norm within the level.
    pub fn at_gamma(&self, gamma: f64) -> Result<GammaOutcome> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Synthesis(format!("gamma must be positive, got {gamma}")));
        }
        match self.central_controller(gamma) {
            Ok(Ok(k)) => Ok(match certify(&self.original, &k) {
                Ok((norm, _)) if norm <= gamma * (1.0 + CERTIFY_SLACK) => GammaOutcome::Feasible(k),
                Ok((norm, _)) => GammaOutcome::Infeasible(Infeasible::Certificate { norm }),
                Err(Error::Control(ControlError::Unstable { radius })) => {
                    GammaOutcome::Infeasible(Infeasible::ClosedLoopUnstable { radius })
                }
                Err(e) => GammaOutcome::Infeasible(Infeasible::Numerical(e.to_string())),
            }),
            Ok(Err(reason)) => Ok(GammaOutcome::Infeasible(reason)),
            Err(e) => Ok(GammaOutcome::Infeasible(Infeasible::Numerical(e.to_string()))),
        }
    }

    fn central_controller(&self, gamma: f64) -> Result<std::result::Result<StateSpace, Infeasible>> {
        let bound = self.feedthrough_bound();
        if gamma <= bound * (1.0 + 1e-12) {
            return Ok(Err(Infeasible::Feedthrough { bound }));
        }
        let n = self.a.nrows();
        let (m1, m2) = (self.b1.ncols(), self.b2.ncols());
        let (p1, p2) = (self.c1.nrows(), self.c2.nrows());
        let g2 = gamma * gamma;
        let a = &self.a;
        let (b1, b2, c1, c2, d11) = (&self.b1, &self.b2, &self.c1, &self.c2, &self.d11);

        let mut b = DMatrix::zeros(n, m1 + m2);
        b.view_mut((0, 0), (n, m1)).copy_from(b1);
        b.view_mut((0, m1), (n, m2)).copy_from(b2);
        let mut c = DMatrix::zeros(p1 + p2, n);
        c.view_mut((0, 0), (p1, n)).copy_from(c1);
        c.view_mut((p1, 0), (p2, n)).copy_from(c2);
        // D1. = [D11, D12], D.1 = [D11; D21] with D12 = [0; I], D21 = [0, I]
        let mut d1r = DMatrix::zeros(p1, m1 + m2);
        d1r.view_mut((0, 0), (p1, m1)).copy_from(d11);
        for i in 0..m2 {
            d1r[(p1 - m2 + i, m1 + i)] = 1.0;
        }
        let mut d1c = DMatrix::zeros(p1 + p2, m1);
        d1c.view_mut((0, 0), (p1, m1)).copy_from(d11);
        for i in 0..p2 {
            d1c[(p1 + i, m1 - p2 + i)] = 1.0;
        }
        let mut r = d1r.transpose() * &d1r;
        for i in 0..m1 {
            r[(i, i)] -= g2;
        }
        let mut rt = &d1c * d1c.transpose();
        for i in 0..p1 {
            rt[(i, i)] -= g2;
        }
        let rinv = match r.clone().try_inverse() {
            Some(v) => v,
            None => return Ok(Err(Infeasible::Numerical("R is singular".into()))),
        };
        let rtinv = match rt.clone().try_inverse() {
            Some(v) => v,
            None => return Ok(Err(Infeasible::Numerical("R~ is singular".into()))),
        };

        let opts = RiccatiOptions::default();
        // X Hamiltonian
        let mut hx = DMatrix::zeros(2 * n, 2 * n);
        hx.view_mut((0, 0), (n, n)).copy_from(a);
        hx.view_mut((n, 0), (n, n)).copy_from(&(-(c1.transpose() * c1)));
        hx.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
        let mut left = DMatrix::zeros(2 * n, m1 + m2);
        left.view_mut((0, 0), (n, m1 + m2)).copy_from(&b);
        left.view_mut((n, 0), (n, m1 + m2))
            .copy_from(&(-(c1.transpose() * &d1r)));
        let mut right = DMatrix::zeros(m1 + m2, 2 * n);
        right.view_mut((0, 0), (m1 + m2, n)).copy_from(&(d1r.transpose() * c1));
        right.view_mut((0, n), (m1 + m2, n)).copy_from(&b.transpose());
        hx -= &left * &rinv * &right;
        let x = match ric_hamiltonian(&hx, &opts) {
            Ok(x) => x,
            Err(e) => return Ok(Err(Infeasible::XRiccati(e.to_string()))),
        };
        let min_x = min_eig(&x);
        if min_x < -PSD_TOL * x.norm().max(1.0) {
            return Ok(Err(Infeasible::XNotPsd { min_eig: min_x }));
        }

        // Y Hamiltonian
        let mut hy = DMatrix::zeros(2 * n, 2 * n);
        hy.view_mut((0, 0), (n, n)).copy_from(&a.transpose());
        hy.view_mut((n, 0), (n, n)).copy_from(&(-(b1 * b1.transpose())));
        hy.view_mut((n, n), (n, n)).copy_from(&(-a));
        let mut left = DMatrix::zeros(2 * n, p1 + p2);
        left.view_mut((0, 0), (n, p1 + p2)).copy_from(&c.transpose());
        left.view_mut((n, 0), (n, p1 + p2))
            .copy_from(&(-(b1 * d1c.transpose())));
        let mut right = DMatrix::zeros(p1 + p2, 2 * n);
        right.view_mut((0, 0), (p1 + p2, n)).copy_from(&(&d1c * b1.transpose()));
        right.view_mut((0, n), (p1 + p2, n)).copy_from(&c);
        hy -= &left * &rtinv * &right;
        let y = match ric_hamiltonian(&hy, &opts) {
            Ok(y) => y,
            Err(e) => return Ok(Err(Infeasible::YRiccati(e.to_string()))),
        };
        let min_y = min_eig(&y);
        if min_y < -PSD_TOL * y.norm().max(1.0) {
            return Ok(Err(Infeasible::YNotPsd { min_eig: min_y }));
        }

        let rho = eigenvalues(&(&x * &y))?.spectral_radius;
        if rho >= g2 {
            return Ok(Err(Infeasible::Coupling { rho }));
        }

        let f = -&rinv * (d1r.transpose() * c1 + b.transpose() * &x);
        let l = -(b1 * d1c.transpose() + &y * c.transpose()) * &rtinv;
        let f12 = f.rows(m1 - p2, p2).into_owned();
        let f2 = f.rows(m1, m2).into_owned();
        let l12 = l.columns(p1 - m2, m2).into_owned();
        let l2 = l.columns(p1, p2).into_owned();

        let d1111 = d11.view((0, 0), (p1 - m2, m1 - p2)).into_owned();
        let d1112 = d11.view((0, m1 - p2), (p1 - m2, p2)).into_owned();
        let d1121 = d11.view((p1 - m2, 0), (m2, m1 - p2)).into_owned();
        let d1122 = d11.view((p1 - m2, m1 - p2), (m2, p2)).into_owned();

        let eye = |k: usize| DMatrix::<f64>::identity(k, k);
        let inv = |m: DMatrix<f64>, what: &str| {
            m.try_inverse()
                .ok_or_else(|| Error::Synthesis(format!("{what} is singular")))
        };
        let w1 = inv(eye(p1 - m2) * g2 - &d1111 * d1111.transpose(), "gamma^2 I - D1111 D1111^T")?;
        let w2 = inv(eye(m1 - p2) * g2 - d1111.transpose() * &d1111, "gamma^2 I - D1111^T D1111")?;
        let dh11 = -&d1121 * d1111.transpose() * &w1 * &d1112 - &d1122;
        let m12 = eye(m2) - &d1121 * &w2 * d1121.transpose();
        let m21 = eye(p2) - d1112.transpose() * &w1 * &d1112;
        let dh12 = match m12.cholesky() {
            Some(ch) => ch.l(),
            None => return Ok(Err(Infeasible::Numerical("D^12 factor not positive".into()))),
        };
        let dh21 = match m21.cholesky() {
            Some(ch) => ch.l().transpose(),
            None => return Ok(Err(Infeasible::Numerical("D^21 factor not positive".into()))),
        };
        let z = match (eye(n) - &y * &x / g2).try_inverse() {
            Some(z) => z,
            None => return Ok(Err(Infeasible::Numerical("I - Y X / gamma^2 is singular".into()))),
        };
        let dh12_inv = inv(dh12.clone(), "D^12")?;
        let dh21_inv = inv(dh21.clone(), "D^21")?;
        let bh2 = &z * (b2 + &l12) * &dh12;
        let ch2 = -&dh21 * (c2 + &f12);
        let bh1 = -&z * &l2 + &bh2 * &dh12_inv * &dh11;
        let ch1 = &f2 + &dh11 * &dh21_inv * &ch2;
        let ah = a + &b * &f + &bh1 * &dh21_inv * &ch2;

        // undo the normalization: u = u_scale u~, y~ = y_scale y
        let bk = &bh1 * &self.y_scale;
        let ck = &self.u_scale * &ch1;
        let dk = &self.u_scale * &dh11 * &self.y_scale;
        // loop shift: the design assumed y - D22 u
        let (ak, bk, ck, dk) = if self.d22.amax() > 0.0 {
            let m = inv(eye(m2) + &dk * &self.d22, "I + Dk D22")?;
            let bd = &bk * &self.d22 * &m;
            (&ah - &bd * &ck, &bk - &bd * &dk, &m * &ck, &m * &dk)
        } else {
            (ah, bk, ck, dk)
        };
        let kc = StateSpace::new(ak, bk, ck, dk, TimeDomain::Continuous)?;
        if kc.a().iter().chain(kc.b().iter()).any(|v| !v.is_finite()) {
            return Ok(Err(Infeasible::Numerical("non-finite controller".into())));
        }
        match bilinear_to_discrete(&kc, self.step) {
            Ok(k) => Ok(Ok(k)),
            Err(e) => Ok(Err(Infeasible::Numerical(e.to_string()))),
        }
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.clone().singular_values().max()
    }
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Single-level feasibility test.
pub fn synthesize_at_gamma(g: &GeneralizedPlant, gamma: f64) -> Result<GammaOutcome> {
    PreparedPlant::new(g)?.at_gamma(gamma)
}

/// Closed-loop `H-infinity` norm and spectral radius of `F_l(G, K)`.
pub fn certify(g: &GeneralizedPlant, k: &StateSpace) -> Result<(f64, f64)> {
    let cl = closed_loop(g, k)?;
    let radius = eigenvalues(cl.a())?.spectral_radius;
    if radius >= 1.0 {
        return Err(Error::Control(ControlError::Unstable { radius }));
    }
    let norm = hinf_norm_discrete(&cl, fdrelay_control::tolerances::HINF_NORM)?;
    Ok((norm, radius))
}

/// Bracketing bisection on `gamma` with relative tolerance `tol`.
pub fn bisect_gamma(g: &GeneralizedPlant, tol: f64) -> Result<SynthesisResult> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Synthesis(format!("tolerance must be positive, got {tol}")));
    }
    let prep = PreparedPlant::new(g)?;
    let mut trace = Vec::new();
    let probe = |gamma: f64, trace: &mut Vec<TraceEntry>| -> Result<Option<StateSpace>> {
        let out = prep.at_gamma(gamma)?;
        Ok(match out {
            GammaOutcome::Feasible(k) => {
                trace.push(TraceEntry {
                    gamma,
                    feasible: true,
                    reason: None,
                });
                Some(k)
            }
            GammaOutcome::Infeasible(r) => {
                trace.push(TraceEntry {
                    gamma,
                    feasible: false,
                    reason: Some(r.to_string()),
                });
                None
            }
        })
    };

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut best = None;
    for _ in 0..=MAX_DOUBLINGS {
        if let Some(k) = probe(hi, &mut trace)? {
            best = Some(k);
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    let Some(mut k_best) = best else {
        let last = trace
            .last()
            .and_then(|t| t.reason.clone())
            .unwrap_or_default();
        return Err(Error::Synthesis(format!(
            "no feasible gamma up to {:e}: {last}",
            lo
        )));
    };
    // lo == 0 has no relative gap; stop once hi is negligible
    while if lo > 0.0 { (hi - lo) / lo > tol } else { hi > 1e-9 } {
        let mid = 0.5 * (lo + hi);
        match probe(mid, &mut trace)? {
            Some(k) => {
                hi = mid;
                k_best = k;
            }
            None => lo = mid,
        }
    }
    let (gamma_certified, spectral_radius) = certify(g, &k_best)?;
    Ok(SynthesisResult {
        controller: DigitalController {
            k: k_best,
            gamma_achieved: hi,
            gamma_certified,
        },
        gamma_min: hi,
        gamma_lower: lo,
        bisection_trace: trace,
        spectral_radius,
        warnings: prep.warnings.clone(),
    })
}

/// Build, lift and synthesize for `params`.
pub fn design(params: &RelayParams, tol: f64) -> Result<SynthesisResult> {
    let lifted = lift(&build_hybrid_plant(params)?)?;
    bisect_gamma(&lifted.plant, tol)
}

/// Design for the same relay with the coupling path removed; this is the
/// filter a relay with exact coupling subtraction would run.
pub fn design_coupling_free(params: &RelayParams, tol: f64) -> Result<SynthesisResult> {
    let mut p = params.clone();
    p.coupling_gain = 0.0;
    design(&p, tol)
}

/// Certify `k` against the lifted plant of `params`.
pub fn certify_for(params: &RelayParams, k: &StateSpace) -> Result<(f64, f64)> {
    let lifted = lift(&build_hybrid_plant(params)?)?;
    certify(&lifted.plant, k)
}
