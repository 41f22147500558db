use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synapse_cascade::bench::{calibrate_threshold, balanced_accuracy, random_pattern, SynapticArray};
use synapse_cascade::{drive_strength, ChainConfig, ChainState, DriveRule, Propagator};

fn chain() -> impl Strategy<Value = ChainConfig> {
    (1usize..=6).prop_flat_map(|k| {
        (
            prop::collection::vec(0.25f64..8.0, k),
            prop::collection::vec(-12.0f64..0.0, k - 1),
        )
            .prop_map(|(c, lg)| ChainConfig::new(c, lg.into_iter().map(f64::exp2).collect()).unwrap())
    })
}

fn chain_and_state() -> impl Strategy<Value = (ChainConfig, Vec<f64>)> {
    chain().prop_flat_map(|c| {
        let k = c.len();
        (Just(c), prop::collection::vec(-2.0f64..2.0, k))
    })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn free_evolution_conserves_capacity_weighted_sum((config, u) in chain_and_state(), t in 0.0f64..1e4) {
        let p = Propagator::new(&config).unwrap();
        let start = ChainState::new(u, 0.0);
        let end = p.evolve_free(&start, t).unwrap();
        let scale: f64 = config.capacities().iter().zip(&start.u).map(|(c, u)| (c * u).abs()).sum::<f64>().max(1e-12);
        let drift = (config.conserved_quantity(&end.u) - config.conserved_quantity(&start.u)).abs() / scale;
        prop_assert!(drift <= 1e-9);
    }

    #[test]
    fn evolution_composes((config, u) in chain_and_state(), s in -2.0f64..2.0, t1 in 0.0f64..200.0, t2 in 0.0f64..200.0) {
        let p = Propagator::new(&config).unwrap();
        let start = ChainState::new(u, 0.0);
        let whole = p.evolve_driven(&start, s, t1 + t2).unwrap();
        let split = p.evolve_driven(&p.evolve_driven(&start, s, t1).unwrap(), s, t2).unwrap();
        let scale = 1.0 + whole.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(max_diff(&whole.u, &split.u) <= 1e-10 * scale);
        prop_assert!((whole.time - split.time).abs() <= 1e-9);
    }

    #[test]
    fn free_evolution_contracts_toward_equilibrium((config, u) in chain_and_state(), t1 in 0.0f64..500.0, dt in 0.0f64..500.0) {
        // no level leaves the range spanned by the earlier state
        let p = Propagator::new(&config).unwrap();
        let a = p.evolve_free(&ChainState::new(u, 0.0), t1).unwrap();
        let b = p.evolve_free(&a, dt).unwrap();
        let span = |v: &[f64]| (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let (lo_a, hi_a) = span(&a.u);
        let (lo_b, hi_b) = span(&b.u);
        prop_assert!(lo_b >= lo_a - 1e-10 && hi_b <= hi_a + 1e-10);
    }

    #[test]
    fn response_is_linear((config, u) in chain_and_state(), v in prop::collection::vec(-2.0f64..2.0, 6), s1 in -2.0f64..2.0, s2 in -2.0f64..2.0, a in -3.0f64..3.0, t in 0.0f64..100.0) {
        let p = Propagator::new(&config).unwrap();
        let k = config.len();
        let x = ChainState::new(u, 0.0);
        let y = ChainState::new(v[..k].to_vec(), 0.0);
        let combined = ChainState::new(x.u.iter().zip(&y.u).map(|(p, q)| p + a * q).collect(), 0.0);
        let lhs = p.evolve_driven(&combined, s1 + a * s2, t).unwrap();
        let ex = p.evolve_driven(&x, s1, t).unwrap();
        let ey = p.evolve_driven(&y, s2, t).unwrap();
        let rhs: Vec<f64> = ex.u.iter().zip(&ey.u).map(|(p, q)| p + a * q).collect();
        let scale = 1.0 + rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(max_diff(&lhs.u, &rhs) <= 1e-9 * scale);
    }

    #[test]
    fn constant_drive_is_linear_in_voltage(base in 0.1f64..10.0, volts in -5.0f64..5.0, u1 in -10.0f64..10.0) {
        let rule = DriveRule::constant(base).unwrap();
        prop_assert_eq!(drive_strength(&rule, u1, 2.0 * volts), 2.0 * drive_strength(&rule, u1, volts));
    }

    #[test]
    fn threshold_decisions_scale_with_distances(
        null in prop::collection::vec(0u32..200, 5..40),
        familiar in prop::collection::vec(0u32..200, 5..40),
        factor in 1u32..6,
    ) {
        let n: Vec<f64> = null.iter().map(|&d| d as f64).collect();
        let f: Vec<f64> = familiar.iter().map(|&d| d as f64).collect();
        let ns: Vec<f64> = n.iter().map(|d| d * factor as f64).collect();
        let fs: Vec<f64> = f.iter().map(|d| d * factor as f64).collect();
        let t = calibrate_threshold(&n, &f).unwrap();
        let ts = calibrate_threshold(&ns, &fs).unwrap();
        let acc = balanced_accuracy(&n, &f, t).unwrap();
        let acc_scaled = balanced_accuracy(&ns, &fs, ts).unwrap();
        prop_assert!((acc - acc_scaled).abs() <= 1e-12);
    }

    #[test]
    fn hebbian_writes_are_symmetric(seed in any::<u64>(), n in 2usize..24, writes in 1usize..6) {
        let p = Propagator::new(&ChainConfig::new(vec![1.0, 1.0], vec![0.05]).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut array = SynapticArray::new(n, &p, 1.0, 1.0, None).unwrap();
        for _ in 0..writes {
            let x = random_pattern(n, &mut rng);
            array.present(&x, &mut rng).unwrap();
        }
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(array.weight(i, j), array.weight(j, i));
            }
        }
    }
}
