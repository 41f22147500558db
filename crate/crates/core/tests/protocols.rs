use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synapse_cascade::protocol::{recover_to_baseline, recovery_fraction, run_cycle, run_relaxation, Phase};
use synapse_cascade::{apply_pulse_train, euler_oracle, ChainConfig, ChainState, DriveRule, Propagator, PulseSchedule};

fn k2(g: f64) -> Propagator {
    Propagator::new(&ChainConfig::new(vec![1.0, 1.0], vec![g]).unwrap()).unwrap()
}

fn simple() -> Propagator {
    Propagator::new(&ChainConfig::simple()).unwrap()
}

fn train(amplitude: f64, d: f64) -> PulseSchedule {
    PulseSchedule::new(amplitude, 1.0, d, 80).unwrap()
}

#[test]
fn relaxation_matches_two_mode_closed_form() {
    // equal capacities: the sum mode integrates the drive, the difference
    // mode relaxes at rate 2g
    for g in [2f64.powf(-7.5), 2f64.powi(-4), 0.3] {
        let p = k2(g);
        let pulse = PulseSchedule::new(3.0, 1.0, 1.0, 1).unwrap();
        let trace = run_relaxation(&p, &DriveRule::default(), &pulse, 160.0).unwrap();
        let s = 2.0 * 3.0;
        let mean = s / 2.0;
        let diff = s * (1.0 - (-2.0 * g).exp()) / (4.0 * g);
        let expected = diff * (1.0 - (-2.0 * g * 160.0).exp()) / (mean + diff);
        let got = recovery_fraction(&trace).unwrap();
        assert!((got - expected).abs() < 1e-12, "g={g}: {got} vs {expected}");
    }
}

#[test]
fn pulse_train_matches_euler_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let k = 3;
        let caps = (0..k).map(|_| rng.random_range(0.5..4.0)).collect();
        let gs = (0..k - 1).map(|_| 2f64.powf(rng.random_range(-8.0..-2.0))).collect();
        let config = ChainConfig::new(caps, gs).unwrap();
        let p = Propagator::new(&config).unwrap();
        let schedule = PulseSchedule::new(1.0, 1.0, 0.5, 10).unwrap();
        let rule = DriveRule::default();
        let trace = apply_pulse_train(&p, &ChainState::zeros(k), &schedule, &rule).unwrap();
        let analytic = trace.final_state().unwrap();
        let drive = |t: f64| if t.fract() < 0.5 { 2.0 } else { 0.0 };
        let zero = ChainState::zeros(k);
        let coarse = euler_oracle(&config, &zero, drive, 1e-4, 10.0).unwrap();
        let fine = euler_oracle(&config, &zero, drive, 5e-5, 10.0).unwrap();
        for i in 0..k {
            let extrapolated = 2.0 * fine.u[i] - coarse.u[i];
            assert!((analytic.u[i] - extrapolated).abs() < 1e-8);
        }
    }
}

#[test]
fn simple_potentiation_mirrors_depression() {
    let p = simple();
    let rule = DriveRule::default();
    let (trace, _) = run_cycle(&p, &rule, &train(1.0, 0.5), &train(-1.0, 0.5), 1).unwrap();
    let u1 = trace.u1();
    let half = 160;
    let peak = u1[half];
    for i in 0..=half {
        assert_eq!(u1[i], peak - u1[half + i]);
    }
}

#[test]
fn complex_cycle_range_is_smaller() {
    // compared once the cycles have settled
    let rule = DriveRule::default();
    let cycle_ranges = |p: &Propagator| {
        let (trace, _) = run_cycle(p, &rule, &train(1.0, 0.5), &train(-1.0, 0.5), 12).unwrap();
        let u1 = trace.u1();
        (8..12)
            .map(|c| {
                let cycle = &u1[c * 320..=(c + 1) * 320];
                cycle.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - cycle.iter().cloned().fold(f64::INFINITY, f64::min)
            })
            .collect::<Vec<f64>>()
    };
    let r1 = cycle_ranges(&simple());
    let r2 = cycle_ranges(&k2(2f64.powf(-7.5)));
    for (a, b) in r1.iter().zip(&r2) {
        assert!(b < a, "{b} vs {a}");
    }
}

#[test]
fn two_compartment_convergence_decreases() {
    let rule = DriveRule::default();
    let (_, report) = run_cycle(&k2(2f64.powf(-7.5)), &rule, &train(1.0, 0.5), &train(-1.0, 0.5), 12).unwrap();
    assert!(report.convergence.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn leg_change_grows_with_duty_cycle() {
    let rule = DriveRule::default();
    for p in [simple(), k2(2f64.powf(-7.5))] {
        let changes: Vec<f64> = [0.25, 1.0 / 3.0, 0.5, 2.0 / 3.0, 0.9]
            .iter()
            .map(|&d| apply_pulse_train(&p, &ChainState::zeros(p.len()), &train(1.0, d), &rule).unwrap().u1_change())
            .collect();
        assert!(changes.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn soft_bounds_slow_the_return() {
    // writing away from the lower bound and back toward it
    let rule = DriveRule::soft_bounded(2.0, 0.0, 100.0).unwrap();
    let n = recover_to_baseline(&simple(), &rule, &train(1.0, 0.5), -1.0, None).unwrap();
    assert!(n > 80, "{n}");
}

#[test]
fn complex_synapse_recovers_in_fewer_pulses() {
    let rule = DriveRule::default();
    for d in [1.0 / 3.0, 0.5, 2.0 / 3.0] {
        let n1 = recover_to_baseline(&simple(), &rule, &train(1.0, d), -1.0, None).unwrap();
        let n2 = recover_to_baseline(&k2(2f64.powf(-7.5)), &rule, &train(1.0, d), -1.0, None).unwrap();
        assert_eq!(n1, 80);
        assert!(n2 < n1, "{n2} vs {n1}");
    }
}

#[test]
fn relaxation_samples_span_the_rest() {
    let p = k2(2f64.powf(-7.5));
    let pulse = PulseSchedule::new(3.0, 1.0, 1.0, 1).unwrap();
    let trace = run_relaxation(&p, &DriveRule::default(), &pulse, 160.0).unwrap();
    let free: Vec<f64> = trace.samples().iter().filter(|s| s.phase == Phase::Free).map(|s| s.time).collect();
    assert!((free.last().unwrap() - 161.0).abs() < 1e-9);
    let u1: Vec<f64> = trace.samples().iter().filter(|s| s.phase == Phase::Free).map(|s| s.u1()).collect();
    assert!(u1.windows(2).all(|w| w[1] <= w[0]));
}
