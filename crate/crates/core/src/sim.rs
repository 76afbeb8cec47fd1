//! Fast-rate baseband simulation of the source -> relay -> terminal chain.

use std::fmt;
use std::str::FromStr;

use fdrelay_control::{discretize_zoh, DMatrix, StateSpace};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::plant::RelayParams;
use crate::synth::DigitalController;
use crate::{Error, Result};

/// RNG stream carrying the relay and terminal noise.
pub const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Canceler {
    /// `K = 0`: nothing is forwarded.
    None,
    Designed(DigitalController),
    /// Coupling subtracted exactly. The relay runs `reference` (normally
    /// the design for the coupling-free loop), or forwards samples
    /// unchanged when it is absent.
    Perfect { reference: Option<DigitalController> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CancelerKind {
    None,
    Designed,
    Perfect,
}

impl CancelerKind {
    pub const ALL: [CancelerKind; 3] = [CancelerKind::None, CancelerKind::Designed, CancelerKind::Perfect];

    pub fn as_str(self) -> &'static str {
        match self {
            CancelerKind::None => "none",
            CancelerKind::Designed => "designed",
            CancelerKind::Perfect => "perfect",
        }
    }
}

impl fmt::Display for CancelerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CancelerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(CancelerKind::None),
            "designed" => Ok(CancelerKind::Designed),
            "perfect" => Ok(CancelerKind::Perfect),
            other => Err(Error::Config(format!(
                "unknown canceler '{other}' (expected none, designed or perfect)"
            ))),
        }
    }
}

impl Canceler {
    /// Perfect cancelation with samples forwarded unchanged.
    pub fn ideal() -> Self {
        Canceler::Perfect { reference: None }
    }

    /// The digital filter the relay runs, if any.
    pub fn controller(&self) -> Option<&DigitalController> {
        match self {
            Canceler::Designed(c) => Some(c),
            Canceler::Perfect { reference } => reference.as_ref(),
            Canceler::None => None,
        }
    }

    pub fn kind(&self) -> CancelerKind {
        match self {
            Canceler::None => CancelerKind::None,
            Canceler::Designed(_) => CancelerKind::Designed,
            Canceler::Perfect { .. } => CancelerKind::Perfect,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: RelayParams,
    /// Forward power gain of the relay in dB.
    pub relay_gain_db: f64,
    /// Amplitude gain of the relay-to-terminal channel.
    pub beta: f64,
    pub noise_rs_dbm: f64,
    pub noise_t_dbm: f64,
    pub signal_dbm: f64,
    pub seed: u64,
    pub canceler: Canceler,
}

impl SimConfig {
    /// Reference simulation settings: 60 dB relay gain, -5 dBm relay noise,
    /// -2 dBm terminal noise, 0 dBm source power.
    pub fn reference(params: RelayParams, canceler: Canceler) -> Self {
        Self {
            params,
            relay_gain_db: 60.0,
            beta: 1.0,
            noise_rs_dbm: -5.0,
            noise_t_dbm: -2.0,
            signal_dbm: 0.0,
            seed: 0,
            canceler,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if !self.relay_gain_db.is_finite() {
            return Err(Error::Config("relay gain must be finite".into()));
        }
        for (v, name) in [
            (self.noise_rs_dbm, "noise_rs_dbm"),
            (self.noise_t_dbm, "noise_t_dbm"),
            (self.signal_dbm, "signal_dbm"),
        ] {
            // -inf disables a source
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::Config(format!("{name} must be finite or -inf, got {v}")));
            }
        }
        if let Some(c) = self.canceler.controller() {
            check_controller(c, &self.params)?;
        }
        Ok(())
    }

    pub fn relay_amplitude_gain(&self) -> f64 {
        10f64.powf(self.relay_gain_db / 20.0)
    }
}

/// Verify a controller fits the relay: discrete, 2x2, slow-period step.
pub fn check_controller(c: &DigitalController, params: &RelayParams) -> Result<()> {
    let k = &c.k;
    let Some(step) = k.domain().step() else {
        return Err(Error::Config("controller must be discrete-time".into()));
    };
    if (step - params.sample_period).abs() > 1e-9 * params.sample_period {
        return Err(Error::StepMismatch {
            controller: step,
            expected: params.sample_period,
        });
    }
    if k.n_inputs() != 2 || k.n_outputs() != 2 {
        return Err(Error::Config(format!(
            "controller must be 2x2, got {}x{}",
            k.n_outputs(),
            k.n_inputs()
        )));
    }
    Ok(())
}

/// I/Q samples at the fast period.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<[f64; 2]>,
    /// Samples per second.
    pub rate: f64,
}

impl Waveform {
    pub fn zeros(len: usize, rate: f64) -> Self {
        Self {
            samples: vec![[0.0; 2]; len],
            rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sum of squared sample magnitudes.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s[0] * s[0] + s[1] * s[1]).sum()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| [a * s[0], a * s[1]]).collect(),
            rate: self.rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// Noise-free received signal.
    pub v: Waveform,
    /// Relay output before the forward gain.
    pub u: Waveform,
    /// Cancelation error `v - u`.
    pub z: Waveform,
    /// Signal at the terminal.
    pub y_t: Waveform,
}

/// Per-component standard deviation for a total power in dBm
/// (1 mW is one power unit). `-inf` gives 0.
pub fn noise_amplitude(p_dbm: f64) -> f64 {
    if p_dbm == f64::NEG_INFINITY {
        0.0
    } else {
        (10f64.powf(p_dbm / 10.0) / 2.0).sqrt()
    }
}

/// Discrete state-space block stepped in place.
struct Block {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    x: DVector<f64>,
    xn: DVector<f64>,
    out: DVector<f64>,
    inp: DVector<f64>,
}

impl Block {
    fn new(sys: &StateSpace) -> Self {
        let n = sys.n_states();
        Self {
            a: sys.a().clone(),
            b: sys.b().clone(),
            c: sys.c().clone(),
            d: sys.d().clone(),
            x: DVector::zeros(n),
            xn: DVector::zeros(n),
            out: DVector::zeros(sys.n_outputs()),
            inp: DVector::zeros(sys.n_inputs()),
        }
    }

    /// Output for the current state and input `inp`.
    fn output(&mut self) -> [f64; 2] {
        self.out.gemv(1.0, &self.c, &self.x, 0.0);
        self.out.gemv(1.0, &self.d, &self.inp, 1.0);
        [self.out[0], self.out[1]]
    }

    fn advance(&mut self) {
        self.xn.gemv(1.0, &self.a, &self.x, 0.0);
        self.xn.gemv(1.0, &self.b, &self.inp, 1.0);
        std::mem::swap(&mut self.x, &mut self.xn);
    }

    fn set_input(&mut self, v: [f64; 2]) {
        self.inp[0] = v[0];
        self.inp[1] = v[1];
    }
}

fn check_finite(v: [f64; 2], step: usize) -> Result<()> {
    if v[0].is_finite() && v[1].is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// Run the relay chain on the transmitted waveform `tx` (fast rate).
///
/// Per fast step `t`: the coupling `alpha A_L u(t - d)` and relay noise are
/// added to `tx`, the anti-alias filter runs, every `N`-th step the
/// canceler consumes a sample and its output is held, and the post filter
/// produces `u`. The terminal sees `beta g u + n_T`.
pub fn simulate_chain(cfg: &SimConfig, tx: &Waveform) -> Result<SimOutput> {
    cfg.validate()?;
    let p = &cfg.params;
    if tx.is_empty() {
        return Err(Error::Config("transmit waveform is empty".into()));
    }
    let tau = p.fast_period();
    let rate = 1.0 / tau;
    if (tx.rate - rate).abs() > 1e-9 * rate {
        return Err(Error::Config(format!(
            "waveform rate {} does not match fast rate {rate}",
            tx.rate
        )));
    }
    let nn = p.fsfh_ratio;
    let d = p.delay_fast_steps()?;
    let mut f = Block::new(&discretize_zoh(&p.anti_alias, tau)?);
    let mut post = Block::new(&discretize_zoh(&p.post_filter, tau)?);
    if d == 0 && post.d.amax() > 0.0 {
        return Err(Error::Config(
            "zero coupling delay with a biproper post filter forms an algebraic loop".into(),
        ));
    }
    let mut k = cfg.canceler.controller().map(|c| Block::new(&c.k));
    let kc = p.rotation() * p.coupling_gain;
    let fwd = cfg.beta * cfg.relay_amplitude_gain();
    let s_rs = noise_amplitude(cfg.noise_rs_dbm);
    let s_t = noise_amplitude(cfg.noise_t_dbm);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(NOISE_STREAM);

    let len = tx.len();
    let mut out = SimOutput {
        v: Waveform::zeros(len, rate),
        u: Waveform::zeros(len, rate),
        z: Waveform::zeros(len, rate),
        y_t: Waveform::zeros(len, rate),
    };
    // ring buffer of past relay outputs, history[t % (d+1)] = u(t)
    let mut history = vec![[0.0f64; 2]; d + 1];
    let mut u_hold = [0.0f64; 2];
    let perfect = matches!(cfg.canceler, Canceler::Perfect { .. });
    let silent = matches!(cfg.canceler, Canceler::None);

    for t in 0..len {
        let n_rs: [f64; 2] = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
        let n_t: [f64; 2] = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
        let v = tx.samples[t];
        check_finite(v, t)?;

        // strictly proper part of the relay output; only needed for d = 0
        let coupling = if d == 0 {
            post.set_input([0.0; 2]);
            post.output()
        } else {
            history[(t + 1) % (d + 1)]
        };
        let c = [
            kc[(0, 0)] * coupling[0] + kc[(0, 1)] * coupling[1],
            kc[(1, 0)] * coupling[0] + kc[(1, 1)] * coupling[1],
        ];
        let mut received = [v[0] + s_rs * n_rs[0], v[1] + s_rs * n_rs[1]];
        if !perfect {
            received[0] += c[0];
            received[1] += c[1];
        }
        f.set_input(received);
        let y_pre = f.output();
        f.advance();

        if t % nn == 0 {
            u_hold = match k.as_mut() {
                Some(kb) => {
                    kb.set_input(y_pre);
                    let u = kb.output();
                    kb.advance();
                    u
                }
                None if silent => [0.0; 2],
                None => y_pre,
            };
        }
        post.set_input(u_hold);
        let u = post.output();
        post.advance();
        check_finite(u, t)?;
        history[t % (d + 1)] = u;

        out.v.samples[t] = v;
        out.u.samples[t] = u;
        out.z.samples[t] = [v[0] - u[0], v[1] - u[1]];
        out.y_t.samples[t] = [fwd * u[0] + s_t * n_t[0], fwd * u[1] + s_t * n_t[1]];
        check_finite(out.y_t.samples[t], t)?;
    }
    Ok(out)
}

/// `W w` on the fast grid with `w` held over each fast step.
pub fn shape_through_weight(params: &RelayParams, w: &Waveform) -> Result<Waveform> {
    let tau = params.fast_period();
    let mut blk = Block::new(&discretize_zoh(&params.weight, tau)?);
    let mut out = Waveform::zeros(w.len(), w.rate);
    for (t, s) in w.samples.iter().enumerate() {
        blk.set_input(*s);
        out.samples[t] = blk.output();
        blk.advance();
    }
    Ok(out)
}
