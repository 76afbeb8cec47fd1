#![allow(dead_code)]

use std::sync::OnceLock;

use fdrelay::plant::default_params;
use fdrelay::sim::Waveform;
use fdrelay::synth::{design, SynthesisResult, DEFAULT_TOL};
use fdrelay_control::{DMatrix, StateSpace};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Reference design, computed once per test binary.
pub fn reference_design() -> &'static SynthesisResult {
    static CELL: OnceLock<SynthesisResult> = OnceLock::new();
    CELL.get_or_init(|| design(&default_params(), DEFAULT_TOL).expect("reference design"))
}

/// Run a discrete system from rest; one output vector per input vector.
pub fn run(sys: &StateSpace, inputs: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut x = DVector::zeros(sys.n_states());
    inputs
        .iter()
        .map(|u| {
            let y = sys.c() * &x + sys.d() * u;
            x = sys.a() * &x + sys.b() * u;
            y
        })
        .collect()
}

pub fn gaussian_waveform(seed: u64, len: usize, rate: f64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Waveform {
        samples: (0..len)
            .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect(),
        rate,
    }
}

pub fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}
