use criterion::{criterion_group, criterion_main, Criterion};
use fdrelay::ber::{sweep_beta, sweep_beta_sequential, CommsConfig};
use fdrelay::plant::default_params;
use fdrelay::sim::{Canceler, SimConfig};
use fdrelay::synth::{design, DEFAULT_TOL};
use std::hint::black_box;

fn bench_sweep(c: &mut Criterion) {
    let p = default_params();
    let k = design(&p, DEFAULT_TOL).expect("reference design").controller;
    let base = SimConfig::reference(p, Canceler::None);
    let mut cc = CommsConfig::reference();
    cc.n_symbols = 500;
    let betas: Vec<f64> = (0..8).map(|i| 1e-4 * 1.5f64.powi(i)).collect();
    let cancelers = [Canceler::None, Canceler::Designed(k), Canceler::ideal()];

    let mut group = c.benchmark_group("ber_sweep");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| sweep_beta_sequential(&base, &cc, black_box(&betas), &cancelers).unwrap())
    });
    group.bench_function("parallel", |b| {
        b.iter(|| sweep_beta(&base, &cc, black_box(&betas), &cancelers).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
