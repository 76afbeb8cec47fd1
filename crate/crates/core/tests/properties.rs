use fdrelay::ber::{demodulate, modulate, point_seed, wilson_interval, BerPoint, CommsConfig, Z95};
use fdrelay::config::{BetaGrid, Dbm, ProjectConfig};
use fdrelay::lift::lift;
use fdrelay::plant::{build_hybrid_plant, default_params, rotation_matrix};
use fdrelay::sim::{simulate_chain, Canceler, SimConfig, Waveform};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wilson_interval_is_ordered_and_contains_estimate(n in 1u64..100_000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).floor() as u64;
        let point = BerPoint::new(0.1, k, n);
        let (lo, hi) = point.ci95;
        prop_assert!(0.0 <= lo && lo <= point.ber && point.ber <= hi && hi <= 1.0);
        prop_assert!(point.errors <= point.trials);
        // more trials at the same rate never widens the interval
        let (lo4, hi4) = wilson_interval(4 * k, 4 * n, Z95);
        prop_assert!(hi4 - lo4 <= hi - lo + 1e-12);
    }

    #[test]
    fn rotation_is_orthonormal(f in 0.0f64..1e5, l in 0.0f64..10.0) {
        let r = rotation_matrix(f, l);
        let i = nalgebra::DMatrix::<f64>::identity(2, 2);
        prop_assert!((r.transpose() * &r - i).amax() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integer_carrier_cycles_give_identity(cycles in 0u32..1_000_000, l in prop::sample::select(vec![0.25, 0.5, 1.0, 2.0])) {
        let r = rotation_matrix(cycles as f64 / l, l);
        prop_assert!((r - nalgebra::DMatrix::<f64>::identity(2, 2)).amax() <= 1e-12);
    }

    #[test]
    fn modulation_round_trips(bits in prop::collection::vec(any::<bool>(), 1..64), dbm in -30.0f64..30.0) {
        let p = default_params();
        let cc = CommsConfig::reference();
        let w = modulate(&bits, &cc, &p, dbm);
        prop_assert_eq!(w.len(), bits.len() * cc.samples_per_symbol(&p));
        prop_assert_eq!(demodulate(&w, &cc, &p, [1.0, 0.0]).unwrap(), bits);
    }

    #[test]
    fn point_seeds_are_distinct(base in any::<u64>(), i in 0usize..10_000, j in 0usize..10_000) {
        prop_assume!(i != j);
        prop_assert_ne!(point_seed(base, i), point_seed(base, j));
    }

    #[test]
    fn noiseless_forwarding_is_linear(scale in -10.0f64..10.0, seed in any::<u64>(), len in 1usize..200) {
        let p = default_params();
        let mut cfg = SimConfig::reference(p.clone(), Canceler::None);
        cfg.noise_rs_dbm = f64::NEG_INFINITY;
        cfg.noise_t_dbm = f64::NEG_INFINITY;
        cfg.canceler = Canceler::ideal();
        cfg.seed = seed;
        let tx = Waveform {
            samples: (0..len).map(|t| [((t * 7 % 11) as f64) - 5.0, (t % 3) as f64]).collect(),
            rate: 1.0 / p.fast_period(),
        };
        let a = simulate_chain(&cfg, &tx).unwrap();
        let b = simulate_chain(&cfg, &tx.scaled(scale)).unwrap();
        let top = a.y_t.samples.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.y_t.samples.iter().zip(&b.y_t.samples) {
            prop_assert!((scale * x[0] - y[0]).abs() <= 1e-10 * top * scale.abs());
            prop_assert!((scale * x[1] - y[1]).abs() <= 1e-10 * top * scale.abs());
        }
    }

    #[test]
    fn config_json_round_trips(
        alpha in 0.0f64..0.9,
        n in 1usize..64,
        seed in any::<u64>(),
        gain in -20.0f64..80.0,
        rs in prop::option::of(-40.0f64..10.0),
        betas in prop::option::of(prop::collection::vec(1e-6f64..10.0, 1..6)),
    ) {
        let mut c = ProjectConfig::default();
        c.relay.coupling_gain = alpha;
        c.relay.fsfh_ratio = n;
        c.sim.seed = seed;
        c.sim.relay_gain_db = gain;
        c.sim.noise_rs_dbm = Dbm(rs.unwrap_or(f64::NEG_INFINITY));
        c.sweep.betas = betas.map_or(BetaGrid::Auto, BetaGrid::List);
        let back = ProjectConfig::from_json(&c.to_json()).unwrap();
        prop_assert_eq!(back, c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lifted_dimensions_follow_ratio(n in 1usize..12, steps in 0usize..4) {
        let mut p = default_params();
        p.fsfh_ratio = n;
        p.delay = steps as f64 / n as f64;
        let lifted = lift(&build_hybrid_plant(&p).unwrap()).unwrap();
        let g = &lifted.plant;
        prop_assert_eq!(g.n_w, 2 * n);
        prop_assert_eq!(g.n_z, 2 * n);
        prop_assert_eq!(g.n_u, 2);
        prop_assert_eq!(g.n_y, 2);
        prop_assert_eq!(lifted.n_states, 4 + 2 * steps);
        prop_assert!(g.system.d().view((2 * n, 2 * n), (2, 2)).amax() == 0.0);
    }
}
