//! BPSK over the relay chain: modulation, coherent integrate-and-dump
//! detection, Monte Carlo BER with Wilson intervals, and beta sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::plant::RelayParams;
use crate::sim::{simulate_chain, Canceler, CancelerKind, SimConfig, Waveform};
use crate::{Error, Result};

/// RNG stream carrying the data bits.
pub const BITS_STREAM: u64 = 0;
/// Symbols in the calibration pilot.
pub const PILOT_SYMBOLS: usize = 128;
/// Normal quantile for 95% intervals.
pub const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pulse {
    #[default]
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Decision {
    #[default]
    IntegrateAndDump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommsConfig {
    /// Symbol period in seconds.
    pub symbol_period: f64,
    pub n_symbols: usize,
    pub pulse: Pulse,
    pub decision: Decision,
}

impl CommsConfig {
    /// Two-second rectangular BPSK symbols, 10000 per run.
    pub fn reference() -> Self {
        Self {
            symbol_period: 2.0,
            n_symbols: 10_000,
            pulse: Pulse::Rectangular,
            decision: Decision::IntegrateAndDump,
        }
    }

    pub fn validate(&self, params: &RelayParams) -> Result<()> {
        if self.n_symbols == 0 {
            return Err(Error::Config("n_symbols must be at least 1".into()));
        }
        let periods = self.symbol_period / params.sample_period;
        if !(periods >= 1.0) || (periods - periods.round()).abs() > 1e-9 * periods {
            return Err(Error::Config(format!(
                "symbol period {} s is not a positive integer multiple of h = {} s",
                self.symbol_period, params.sample_period
            )));
        }
        Ok(())
    }

    pub fn samples_per_symbol(&self, params: &RelayParams) -> usize {
        (self.symbol_period / params.sample_period).round() as usize * params.fsfh_ratio
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub beta: f64,
    pub errors: u64,
    pub trials: u64,
    pub ber: f64,
    pub ci95: (f64, f64),
}

impl BerPoint {
    pub fn new(beta: f64, errors: u64, trials: u64) -> Self {
        let ber = if trials == 0 { 0.0 } else { errors as f64 / trials as f64 };
        Self {
            beta,
            errors,
            trials,
            ber,
            ci95: wilson_interval(errors, trials, Z95),
        }
    }

    pub fn ci_width(&self) -> f64 {
        self.ci95.1 - self.ci95.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    pub canceler: CancelerKind,
    pub points: Vec<BerPoint>,
}

/// Wilson score interval for `errors` successes in `trials`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Antipodal BPSK error rate `Q(sqrt(2 Eb/N0))` for `Eb/N0` in dB.
pub fn bpsk_theory(ebn0_db: f64) -> f64 {
    q_function((2.0 * 10f64.powf(ebn0_db / 10.0)).sqrt())
}

/// Bit 0 maps to `-A`, bit 1 to `+A` on the in-phase component, held for
/// one symbol, with `A = sqrt(10^(dBm/10))`.
pub fn modulate(bits: &[bool], cc: &CommsConfig, params: &RelayParams, signal_dbm: f64) -> Waveform {
    let sps = cc.samples_per_symbol(params);
    let amp = if signal_dbm == f64::NEG_INFINITY {
        0.0
    } else {
        10f64.powf(signal_dbm / 20.0)
    };
    let mut samples = Vec::with_capacity(bits.len() * sps);
    for &b in bits {
        let s = if b { amp } else { -amp };
        samples.extend(std::iter::repeat_n([s, 0.0], sps));
    }
    Waveform {
        samples,
        rate: 1.0 / params.fast_period(),
    }
}

/// Per-symbol integrate-and-dump of the projection onto `phase_ref`;
/// positive statistics decode as 1.
pub fn demodulate(
    y: &Waveform,
    cc: &CommsConfig,
    params: &RelayParams,
    phase_ref: [f64; 2],
) -> Result<Vec<bool>> {
    Ok(symbol_statistics(y, cc, params, phase_ref)?
        .into_iter()
        .map(|s| s > 0.0)
        .collect())
}

fn symbol_statistics(
    y: &Waveform,
    cc: &CommsConfig,
    params: &RelayParams,
    phase_ref: [f64; 2],
) -> Result<Vec<f64>> {
    let sps = cc.samples_per_symbol(params);
    if sps == 0 || y.len() % sps != 0 {
        return Err(Error::Framing(format!(
            "{} samples is not a multiple of {sps} samples per symbol",
            y.len()
        )));
    }
    Ok(y.samples
        .chunks_exact(sps)
        .map(|c| c.iter().map(|s| s[0] * phase_ref[0] + s[1] * phase_ref[1]).sum())
        .collect())
}

/// Deterministic chain response measured on a noise-free pilot: the
/// integer fast-sample delay and the gain/rotation 2-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainCalibration {
    pub delay: usize,
    pub phase_ref: [f64; 2],
}

fn pilot_bits() -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_b175);
    (0..PILOT_SYMBOLS).map(|_| rng.random::<bool>()).collect()
}

fn padded(tx: &Waveform, extra: usize) -> Waveform {
    let mut out = tx.clone();
    out.samples.extend(std::iter::repeat_n([0.0, 0.0], extra));
    out
}

pub fn calibrate(cfg: &SimConfig, cc: &CommsConfig) -> Result<ChainCalibration> {
    let p = &cfg.params;
    let sps = cc.samples_per_symbol(p);
    let mut quiet = cfg.clone();
    quiet.noise_rs_dbm = f64::NEG_INFINITY;
    quiet.noise_t_dbm = f64::NEG_INFINITY;
    let bits = pilot_bits();
    let tx = modulate(&bits, cc, p, cfg.signal_dbm);
    let y = simulate_chain(&quiet, &padded(&tx, sps))?.y_t;
    let energy: f64 = tx.samples.iter().map(|s| s[0] * s[0]).sum();
    let mut best = (0, [0.0; 2], -1.0);
    for delay in 0..sps {
        let mut g = [0.0; 2];
        for (t, s) in tx.samples.iter().enumerate() {
            let r = y.samples[t + delay];
            g[0] += r[0] * s[0];
            g[1] += r[1] * s[0];
        }
        let mag = g[0].hypot(g[1]);
        if mag > best.2 {
            best = (delay, g, mag);
        }
    }
    let (delay, g, mag) = best;
    let phase_ref = if mag > 0.0 && energy > 0.0 {
        [g[0] / energy, g[1] / energy]
    } else {
        // nothing reaches the terminal; decisions are left to the noise
        [1.0, 0.0]
    };
    Ok(ChainCalibration { delay, phase_ref })
}

/// Data bits for `seed` drawn from the bit stream.
pub fn random_bits(seed: u64, n: usize) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BITS_STREAM);
    (0..n).map(|_| rng.random::<bool>()).collect()
}

/// Monte Carlo BER at the terminal for one configuration.
pub fn run_ber(cfg: &SimConfig, cc: &CommsConfig) -> Result<BerPoint> {
    cfg.validate()?;
    cc.validate(&cfg.params)?;
    let p = &cfg.params;
    let sps = cc.samples_per_symbol(p);
    let cal = calibrate(cfg, cc)?;
    let bits = random_bits(cfg.seed, cc.n_symbols);
    let tx = modulate(&bits, cc, p, cfg.signal_dbm);
    let y = simulate_chain(cfg, &padded(&tx, sps))?.y_t;
    let aligned = Waveform {
        samples: y.samples[cal.delay..cal.delay + tx.len()].to_vec(),
        rate: y.rate,
    };
    let decided = demodulate(&aligned, cc, p, cal.phase_ref)?;
    let errors = decided.iter().zip(&bits).filter(|(a, b)| a != b).count() as u64;
    Ok(BerPoint::new(cfg.beta, errors, bits.len() as u64))
}

/// Seed of sweep point `index`: `base + index * 0x9E3779B97F4A7C15`
/// (wrapping). Every canceler at a given beta shares it.
pub fn point_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn check_sweep(betas: &[f64], cancelers: &[Canceler]) -> Result<()> {
    if betas.is_empty() {
        return Err(Error::Config("beta list is empty".into()));
    }
    if betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(Error::Config("beta values must be positive and finite".into()));
    }
    if betas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("beta values must be strictly increasing".into()));
    }
    if cancelers.is_empty() {
        return Err(Error::Config("canceler list is empty".into()));
    }
    Ok(())
}

fn sweep_point(
    base: &SimConfig,
    cc: &CommsConfig,
    index: usize,
    beta: f64,
    cancelers: &[Canceler],
) -> Result<Vec<BerPoint>> {
    cancelers
        .iter()
        .map(|c| {
            let mut cfg = base.clone();
            cfg.beta = beta;
            cfg.seed = point_seed(base.seed, index);
            cfg.canceler = c.clone();
            run_ber(&cfg, cc)
        })
        .collect()
}

fn assemble(cancelers: &[Canceler], rows: Vec<Vec<BerPoint>>) -> Vec<BerCurve> {
    cancelers
        .iter()
        .enumerate()
        .map(|(j, c)| BerCurve {
            canceler: c.kind(),
            points: rows.iter().map(|r| r[j]).collect(),
        })
        .collect()
}

/// One curve per canceler over increasing `betas`, one thread per beta.
#[cfg(feature = "parallel")]
pub fn sweep_beta(
    base: &SimConfig,
    cc: &CommsConfig,
    betas: &[f64],
    cancelers: &[Canceler],
) -> Result<Vec<BerCurve>> {
    use rayon::prelude::*;
    check_sweep(betas, cancelers)?;
    let rows = betas
        .par_iter()
        .enumerate()
        .map(|(i, &b)| sweep_point(base, cc, i, b, cancelers))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(cancelers, rows))
}

#[cfg(not(feature = "parallel"))]
pub fn sweep_beta(
    base: &SimConfig,
    cc: &CommsConfig,
    betas: &[f64],
    cancelers: &[Canceler],
) -> Result<Vec<BerCurve>> {
    sweep_beta_sequential(base, cc, betas, cancelers)
}

pub fn sweep_beta_sequential(
    base: &SimConfig,
    cc: &CommsConfig,
    betas: &[f64],
    cancelers: &[Canceler],
) -> Result<Vec<BerCurve>> {
    check_sweep(betas, cancelers)?;
    let rows = betas
        .iter()
        .enumerate()
        .map(|(i, &b)| sweep_point(base, cc, i, b, cancelers))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(cancelers, rows))
}

/// Gaussian model of the perfect-cancelation BER versus beta, calibrated
/// from noise-free and noise-only pilot runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerModel {
    /// Mean decision statistic per symbol at `beta = 1`.
    pub signal: f64,
    /// Statistic variance from relay noise at `beta = 1` (scales as beta^2).
    pub var_relay: f64,
    /// Statistic variance from terminal noise (independent of beta).
    pub var_terminal: f64,
}

impl BerModel {
    pub fn ber(&self, beta: f64) -> f64 {
        let var = beta * beta * self.var_relay + self.var_terminal;
        if var <= 0.0 {
            return 0.0;
        }
        q_function(beta * self.signal / var.sqrt())
    }

    /// BER as beta grows without bound.
    pub fn floor(&self) -> f64 {
        if self.var_relay <= 0.0 {
            0.0
        } else {
            q_function(self.signal / self.var_relay.sqrt())
        }
    }
}

pub fn perfect_ber_model(base: &SimConfig, cc: &CommsConfig) -> Result<BerModel> {
    let p = &base.params;
    let mut cfg = base.clone();
    cfg.canceler = Canceler::ideal();
    cfg.beta = 1.0;
    cc.validate(p)?;
    let cal = calibrate(&cfg, cc)?;
    let unit = {
        let n = cal.phase_ref[0].hypot(cal.phase_ref[1]);
        if n > 0.0 {
            [cal.phase_ref[0] / n, cal.phase_ref[1] / n]
        } else {
            [1.0, 0.0]
        }
    };
    let sps = cc.samples_per_symbol(p);
    let amp = 10f64.powf(cfg.signal_dbm / 20.0);
    let signal = (cal.phase_ref[0] * unit[0] + cal.phase_ref[1] * unit[1]) * amp * sps as f64;

    // relay noise only, zero input
    let symbols = 2048;
    let mut quiet = cfg.clone();
    quiet.noise_t_dbm = f64::NEG_INFINITY;
    quiet.seed = point_seed(base.seed, usize::MAX);
    let y = simulate_chain(&quiet, &Waveform::zeros((symbols + 1) * sps, 1.0 / p.fast_period()))?.y_t;
    let aligned = Waveform {
        samples: y.samples[cal.delay..cal.delay + symbols * sps].to_vec(),
        rate: y.rate,
    };
    let stats = symbol_statistics(&aligned, cc, p, unit)?;
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    let var_relay = stats.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (stats.len() - 1) as f64;
    let s_t = crate::sim::noise_amplitude(cfg.noise_t_dbm);
    let var_terminal = sps as f64 * s_t * s_t;
    Ok(BerModel {
        signal,
        var_relay,
        var_terminal,
    })
}

/// Number of points in the automatic beta grid.
pub const AUTO_GRID_POINTS: usize = 12;

/// Log-spaced betas on which the perfect-cancelation BER spans about
/// `[max(1e-4, 2 floor), 0.3]`.
pub fn auto_beta_grid(base: &SimConfig, cc: &CommsConfig) -> Result<Vec<f64>> {
    let model = perfect_ber_model(base, cc)?;
    let top = 0.3;
    let bottom = (2.0 * model.floor()).max(1e-4);
    if model.signal <= 0.0 || bottom >= top {
        return Err(Error::Config(
            "relay noise floor leaves no usable beta range".into(),
        ));
    }
    let solve = |target: f64| -> f64 {
        // BER decreases in beta; bisect on log10(beta)
        let (mut lo, mut hi) = (-12.0f64, 12.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if model.ber(10f64.powf(mid)) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let (a, b) = (solve(top), solve(bottom));
    let n = AUTO_GRID_POINTS;
    Ok((0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect())
}
