//! Fast-sample/fast-hold lifting of the hybrid plant to a single-rate
//! discrete generalized plant.

use std::ops::Range;

use fdrelay_control::{discretize_zoh, DMatrix, StateSpace, TimeDomain};

use crate::plant::{ports, HybridPlant, RelayParams};
use crate::{Error, Result};

/// Discrete plant with inputs `[w; u]` and outputs `[z; y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedPlant {
    pub system: StateSpace,
    pub n_w: usize,
    pub n_u: usize,
    pub n_z: usize,
    pub n_y: usize,
}

impl GeneralizedPlant {
    pub fn new(system: StateSpace, n_u: usize, n_y: usize) -> Result<Self> {
        if system.domain().step().is_none() {
            return Err(Error::Interconnection(
                "generalized plant must be discrete-time".into(),
            ));
        }
        if n_u > system.n_inputs() || n_y > system.n_outputs() {
            return Err(Error::Interconnection(format!(
                "partition ({n_u} controls, {n_y} measurements) exceeds {}x{} plant",
                system.n_outputs(),
                system.n_inputs()
            )));
        }
        Ok(Self {
            n_w: system.n_inputs() - n_u,
            n_z: system.n_outputs() - n_y,
            n_u,
            n_y,
            system,
        })
    }

    pub fn step(&self) -> f64 {
        self.system.domain().step().expect("discrete by construction")
    }

    pub fn w_range(&self) -> Range<usize> {
        0..self.n_w
    }

    pub fn u_range(&self) -> Range<usize> {
        self.n_w..self.n_w + self.n_u
    }

    pub fn z_range(&self) -> Range<usize> {
        0..self.n_z
    }

    pub fn y_range(&self) -> Range<usize> {
        self.n_z..self.n_z + self.n_y
    }

    /// Open-loop `w -> z` block.
    pub fn performance_block(&self) -> StateSpace {
        self.system.select(self.w_range(), self.z_range())
    }
}

/// Lifted single-rate plant at the slow period `h`.
///
/// Inputs are `[w_lifted (2N); u (2)]`, outputs `[z_lifted (2N); y (2)]`.
/// Fast sample `k` of the slow period occupies rows/columns `2k..2k+2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPlant {
    pub plant: GeneralizedPlant,
    pub n_states: usize,
    pub fsfh_ratio: usize,
    pub provenance: RelayParams,
}

/// Fast-rate discrete plant at `tau = h/N` with the coupling loop closed
/// through the delay register. Inputs `[w (2); u (2)]`, outputs
/// `[z (2); y (2)]`, state `[x_core; r_1; ...; r_d]` where `r_i` holds the
/// relay output `i` fast steps ago.
pub fn fast_rate_plant(plant: &HybridPlant) -> Result<StateSpace> {
    let tau = plant.sample_period / plant.fsfh_ratio as f64;
    let core = discretize_zoh(&plant.ct_core, tau)?;
    let nc = core.n_states();
    let d = plant.delay_fast_steps;
    let kc = &plant.rotation * plant.coupling_gain;

    let phi = core.a();
    let gw = core.b().columns_range(ports::W).into_owned();
    let gu = core.b().columns_range(ports::U_HOLD).into_owned();
    let gc = core.b().columns_range(ports::COUPLING).into_owned();
    let row = |r: Range<usize>, m: &DMatrix<f64>| m.rows_range(r).into_owned();
    let (cz, cy, co) = (
        row(ports::Z, core.c()),
        row(ports::Y_PRESAMPLE, core.c()),
        row(ports::U_OUT, core.c()),
    );
    let dz = row(ports::Z, core.d());
    let dy = row(ports::Y_PRESAMPLE, core.d());
    let dout = row(ports::U_OUT, core.d());
    let blk = |m: &DMatrix<f64>, cols: Range<usize>| m.columns_range(cols).into_owned();
    let (dzw, dzu) = (blk(&dz, ports::W), blk(&dz, ports::U_HOLD));
    let (dyw, dyu, dyc) = (
        blk(&dy, ports::W),
        blk(&dy, ports::U_HOLD),
        blk(&dy, ports::COUPLING),
    );
    let (dow, dou) = (blk(&dout, ports::W), blk(&dout, ports::U_HOLD));

    let n = nc + 2 * d;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, 4);
    let mut c = DMatrix::zeros(4, n);
    let mut dd = DMatrix::zeros(4, 4);

    c.view_mut((0, 0), (2, nc)).copy_from(&cz);
    dd.view_mut((0, 0), (2, 2)).copy_from(&dzw);
    dd.view_mut((0, 2), (2, 2)).copy_from(&dzu);

    if d == 0 {
        // coupling = kc * u_out = kc * (co x + dow w + dou u)
        let gk = &gc * &kc;
        a.copy_from(&(phi + &gk * &co));
        b.view_mut((0, 0), (nc, 2)).copy_from(&(&gw + &gk * &dow));
        b.view_mut((0, 2), (nc, 2)).copy_from(&(&gu + &gk * &dou));
        let yk = &dyc * &kc;
        c.view_mut((2, 0), (2, nc)).copy_from(&(&cy + &yk * &co));
        dd.view_mut((2, 0), (2, 2)).copy_from(&(&dyw + &yk * &dow));
        dd.view_mut((2, 2), (2, 2)).copy_from(&(&dyu + &yk * &dou));
    } else {
        let last = nc + 2 * (d - 1);
        a.view_mut((0, 0), (nc, nc)).copy_from(phi);
        a.view_mut((0, last), (nc, 2)).copy_from(&(&gc * &kc));
        a.view_mut((nc, 0), (2, nc)).copy_from(&co);
        for i in 1..d {
            let (r, q) = (nc + 2 * i, nc + 2 * (i - 1));
            a[(r, q)] = 1.0;
            a[(r + 1, q + 1)] = 1.0;
        }
        b.view_mut((0, 0), (nc, 2)).copy_from(&gw);
        b.view_mut((0, 2), (nc, 2)).copy_from(&gu);
        b.view_mut((nc, 0), (2, 2)).copy_from(&dow);
        b.view_mut((nc, 2), (2, 2)).copy_from(&dou);
        c.view_mut((2, 0), (2, nc)).copy_from(&cy);
        c.view_mut((2, last), (2, 2)).copy_from(&(&dyc * &kc));
        dd.view_mut((2, 0), (2, 2)).copy_from(&dyw);
        dd.view_mut((2, 2), (2, 2)).copy_from(&dyu);
    }
    Ok(StateSpace::new(a, b, c, dd, TimeDomain::Discrete { step: tau })?)
}

/// Lift `N` fast steps into one slow step. `w` is held per fast step and
/// `z` read at every fast step; `u` is held over the slow period and `y`
/// is the fast-grid sample at fast index 0.
pub fn lift(plant: &HybridPlant) -> Result<LiftedPlant> {
    let fast = fast_rate_plant(plant)?;
    let nn = plant.fsfh_ratio;
    let n = fast.n_states();
    let af = fast.a();
    let bw = fast.b().columns(0, 2).into_owned();
    let bu = fast.b().columns(2, 2).into_owned();
    let cz = fast.c().rows(0, 2).into_owned();
    let cy = fast.c().rows(2, 2).into_owned();
    let dzw = fast.d().view((0, 0), (2, 2)).into_owned();
    let dzu = fast.d().view((0, 2), (2, 2)).into_owned();
    let dyw = fast.d().view((2, 0), (2, 2)).into_owned();
    let dyu = fast.d().view((2, 2), (2, 2)).into_owned();

    // powers[k] = Af^k, k = 0..=N
    let mut powers = Vec::with_capacity(nn + 1);
    powers.push(DMatrix::<f64>::identity(n, n));
    for k in 0..nn {
        let next = af * &powers[k];
        powers.push(next);
    }
    // pw[k] = Af^k Bw
    let pw: Vec<DMatrix<f64>> = powers[..nn].iter().map(|p| p * &bw).collect();
    // su[i] = sum_{j<i} Af^{i-1-j} Bu
    let mut su = Vec::with_capacity(nn + 1);
    su.push(DMatrix::<f64>::zeros(n, 2));
    for i in 0..nn {
        let next = af * &su[i] + &bu;
        su.push(next);
    }

    let nw = 2 * nn;
    let a = powers[nn].clone();
    let mut b = DMatrix::zeros(n, nw + 2);
    let mut c = DMatrix::zeros(nw + 2, n);
    let mut d = DMatrix::zeros(nw + 2, nw + 2);
    for j in 0..nn {
        b.view_mut((0, 2 * j), (n, 2)).copy_from(&pw[nn - 1 - j]);
    }
    b.view_mut((0, nw), (n, 2)).copy_from(&su[nn]);
    for i in 0..nn {
        let czi = &cz * &powers[i];
        c.view_mut((2 * i, 0), (2, n)).copy_from(&czi);
        d.view_mut((2 * i, 2 * i), (2, 2)).copy_from(&dzw);
        for j in 0..i {
            let blk = &cz * &pw[i - 1 - j];
            d.view_mut((2 * i, 2 * j), (2, 2)).copy_from(&blk);
        }
        let zu = &dzu + &cz * &su[i];
        d.view_mut((2 * i, nw), (2, 2)).copy_from(&zu);
    }
    c.view_mut((nw, 0), (2, n)).copy_from(&cy);
    d.view_mut((nw, 0), (2, 2)).copy_from(&dyw);
    d.view_mut((nw, nw), (2, 2)).copy_from(&dyu);
    let system = StateSpace::new(
        a,
        b,
        c,
        d,
        TimeDomain::Discrete {
            step: plant.sample_period,
        },
    )?;
    Ok(LiftedPlant {
        plant: GeneralizedPlant::new(system, 2, 2)?,
        n_states: n,
        fsfh_ratio: nn,
        provenance: plant.params.clone(),
    })
}

/// Lower linear-fractional interconnection `F_l(G, K)`: the `w -> z`
/// closed loop with `u = K y`.
pub fn closed_loop(g: &GeneralizedPlant, k: &StateSpace) -> Result<StateSpace> {
    if k.n_inputs() != g.n_y || k.n_outputs() != g.n_u {
        return Err(Error::Interconnection(format!(
            "controller is {}x{}, plant needs {}x{}",
            k.n_outputs(),
            k.n_inputs(),
            g.n_u,
            g.n_y
        )));
    }
    if let (Some(hg), Some(hk)) = (g.system.domain().step(), k.domain().step()) {
        if (hg - hk).abs() > 1e-12 * hg.max(hk) {
            return Err(Error::Interconnection(format!(
                "controller step {hk} differs from plant step {hg}"
            )));
        }
    } else {
        return Err(Error::Interconnection(
            "controller must be discrete-time".into(),
        ));
    }
    let sys = &g.system;
    let (wr, ur, zr, yr) = (g.w_range(), g.u_range(), g.z_range(), g.y_range());
    let a = sys.a();
    let b1 = sys.b().columns_range(wr.clone()).into_owned();
    let b2 = sys.b().columns_range(ur.clone()).into_owned();
    let c1 = sys.c().rows_range(zr.clone()).into_owned();
    let c2 = sys.c().rows_range(yr.clone()).into_owned();
    let d11 = sys.d().view((zr.start, wr.start), (g.n_z, g.n_w)).into_owned();
    let d12 = sys.d().view((zr.start, ur.start), (g.n_z, g.n_u)).into_owned();
    let d21 = sys.d().view((yr.start, wr.start), (g.n_y, g.n_w)).into_owned();
    let d22 = sys.d().view((yr.start, ur.start), (g.n_y, g.n_u)).into_owned();
    let (ak, bk, ck, dk) = (k.a(), k.b(), k.c(), k.d());

    let loop_m = DMatrix::<f64>::identity(g.n_y, g.n_y) - &d22 * dk;
    let lu = loop_m.clone().lu();
    let cond_ok = loop_m.nrows() == 0 || {
        let sv = loop_m.singular_values();
        sv.min() > 1e-12 * sv.max().max(1.0)
    };
    let nmat = match lu.try_inverse() {
        Some(inv) if cond_ok => inv,
        _ => return Err(Error::WellPosedness),
    };

    // y = N (C2 x + D21 w + D22 Ck xk), u = Ck xk + Dk y
    let ny_c2 = &nmat * &c2;
    let ny_d21 = &nmat * &d21;
    let ny_ck = &nmat * &d22 * ck;
    let u_x = dk * &ny_c2;
    let u_xk = ck + dk * &ny_ck;
    let u_w = dk * &ny_d21;

    let (n, nk) = (sys.n_states(), k.n_states());
    let mut acl = DMatrix::zeros(n + nk, n + nk);
    acl.view_mut((0, 0), (n, n)).copy_from(&(a + &b2 * &u_x));
    acl.view_mut((0, n), (n, nk)).copy_from(&(&b2 * &u_xk));
    acl.view_mut((n, 0), (nk, n)).copy_from(&(bk * &ny_c2));
    acl.view_mut((n, n), (nk, nk)).copy_from(&(ak + bk * &ny_ck));
    let mut bcl = DMatrix::zeros(n + nk, g.n_w);
    bcl.view_mut((0, 0), (n, g.n_w)).copy_from(&(&b1 + &b2 * &u_w));
    bcl.view_mut((n, 0), (nk, g.n_w)).copy_from(&(bk * &ny_d21));
    let mut ccl = DMatrix::zeros(g.n_z, n + nk);
    ccl.view_mut((0, 0), (g.n_z, n)).copy_from(&(&c1 + &d12 * &u_x));
    ccl.view_mut((0, n), (g.n_z, nk)).copy_from(&(&d12 * &u_xk));
    let dcl = &d11 + &d12 * &u_w;
    Ok(StateSpace::new(acl, bcl, ccl, dcl, sys.domain())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{build_hybrid_plant, default_params};

    #[test]
    fn default_dimensions() {
        let lp = lift(&build_hybrid_plant(&default_params()).unwrap()).unwrap();
        assert_eq!(lp.n_states, 36);
        assert_eq!(lp.plant.n_w, 32);
        assert_eq!(lp.plant.n_z, 32);
        assert_eq!(lp.plant.n_u, 2);
        assert_eq!(lp.plant.n_y, 2);
        assert_eq!(lp.plant.step(), 1.0);
    }

    #[test]
    fn default_lifted_d22_is_zero() {
        let lp = lift(&build_hybrid_plant(&default_params()).unwrap()).unwrap();
        let g = &lp.plant;
        let d22 = g.system.d().view((g.n_z, g.n_w), (2, 2)).into_owned();
        assert_eq!(d22.amax(), 0.0);
    }

    #[test]
    fn degenerate_lift_is_plain_zoh() {
        let mut p = default_params();
        p.fsfh_ratio = 1;
        p.delay = 0.0;
        p.coupling_gain = 0.0;
        let hp = build_hybrid_plant(&p).unwrap();
        let lp = lift(&hp).unwrap();
        let zoh = discretize_zoh(&hp.ct_core, 1.0).unwrap();
        assert!((lp.plant.system.a() - zoh.a()).amax() < 1e-14);
        let want_b = zoh.b().columns(0, 4).into_owned();
        assert!((lp.plant.system.b() - want_b).amax() < 1e-14);
        let want_c = zoh.c().rows(0, 4).into_owned();
        assert!((lp.plant.system.c() - want_c).amax() < 1e-14);
    }

    #[test]
    fn zero_controller_gives_open_loop_block() {
        let lp = lift(&build_hybrid_plant(&default_params()).unwrap()).unwrap();
        let k = StateSpace::gain(DMatrix::zeros(2, 2), TimeDomain::Discrete { step: 1.0 }).unwrap();
        let cl = closed_loop(&lp.plant, &k).unwrap();
        assert_eq!(cl, lp.plant.performance_block());
    }

    #[test]
    fn interconnection_errors() {
        let lp = lift(&build_hybrid_plant(&default_params()).unwrap()).unwrap();
        let wrong = StateSpace::gain(DMatrix::zeros(3, 2), TimeDomain::Discrete { step: 1.0 }).unwrap();
        assert!(matches!(
            closed_loop(&lp.plant, &wrong),
            Err(Error::Interconnection(_))
        ));
        let step = StateSpace::gain(DMatrix::zeros(2, 2), TimeDomain::Discrete { step: 2.0 }).unwrap();
        assert!(matches!(
            closed_loop(&lp.plant, &step),
            Err(Error::Interconnection(_))
        ));
    }

    #[test]
    fn algebraic_loop_is_rejected() {
        // y = u + w, u = y -> singular I - D22 Dk
        let sys = StateSpace::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 2),
            DMatrix::zeros(2, 0),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            TimeDomain::Discrete { step: 1.0 },
        )
        .unwrap();
        let g = GeneralizedPlant::new(sys, 1, 1).unwrap();
        let k = StateSpace::gain(DMatrix::identity(1, 1), TimeDomain::Discrete { step: 1.0 }).unwrap();
        assert!(matches!(closed_loop(&g, &k), Err(Error::WellPosedness)));
    }
}
