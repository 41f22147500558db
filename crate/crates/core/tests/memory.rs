use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use synapse_cascade::bench::{
    balanced_accuracy, calibrate_threshold, fd_decide, ingest_features, io_snr, random_pattern, run_benchmark,
    BenchConfig, Decision, SynapseModel, SynapticArray,
};
use synapse_cascade::{ChainConfig, FeatureMatrix, Propagator};

fn accumulator(n: usize) -> SynapticArray {
    let p = Propagator::new(&ChainConfig::simple()).unwrap();
    SynapticArray::new(n, &p, 1.0, 1.0, None).unwrap()
}

/// Standard normal CDF by Simpson integration of the density.
fn normal_cdf(z: f64) -> f64 {
    let (a, steps) = (-12.0f64, 20_000);
    let h = (z - a) / steps as f64;
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut sum = pdf(a) + pdf(z);
    for i in 1..steps {
        sum += pdf(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

#[test]
fn unbounded_accumulator_snr_follows_write_count() {
    // the null overlap sums (2n^2 - n) T unit-variance terms, because w_ij
    // and w_ji carry the same writes
    let n = 64;
    let t = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut array = accumulator(n);
    let stored: Vec<Vec<i8>> = (0..t).map(|_| random_pattern(n, &mut rng)).collect();
    for x in &stored {
        array.present(x, &mut rng).unwrap();
    }
    let n_syn = (n * n) as f64;
    let predicted = n_syn / (((2 * n * n - n) * t) as f64).sqrt();
    let mean: f64 = stored
        .iter()
        .map(|x| io_snr(&array, x, 400, &mut rng).unwrap())
        .sum::<f64>()
        / t as f64;
    assert!((mean / predicted - 1.0).abs() < 0.1, "{mean} vs {predicted}");
}

#[test]
fn novel_probe_snr_is_centred() {
    let n = 48;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut array = accumulator(n);
    for _ in 0..20 {
        let x = random_pattern(n, &mut rng);
        array.present(&x, &mut rng).unwrap();
    }
    let values: Vec<f64> = (0..300)
        .map(|_| io_snr(&array, &random_pattern(n, &mut rng), 100, &mut rng).unwrap())
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    assert!(mean.abs() < 3.0 / (values.len() as f64).sqrt() * 1.2, "{mean}");
}

#[test]
fn saturated_memory_recalls_novel_probes_at_chance() {
    let n = 64;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut array = accumulator(n);
    for _ in 0..2000 {
        let x = random_pattern(n, &mut rng);
        array.present(&x, &mut rng).unwrap();
    }
    let m = 400;
    let distances: Vec<f64> = (0..m)
        .map(|_| array.recall_distance(&random_pattern(n, &mut rng)).unwrap() as f64)
        .collect();
    let mean = distances.iter().sum::<f64>() / m as f64;
    // binomial spread of a fair coin per neuron
    let se = (n as f64 * 0.25 / m as f64).sqrt();
    assert!((mean - n as f64 / 2.0).abs() < 4.0 * se, "{mean}");

    let threshold = mean;
    let accepted = distances.iter().filter(|d| fd_decide(**d as usize, threshold) == Decision::Familiar).count();
    let rate = accepted as f64 / m as f64;
    assert!((rate - 0.5).abs() < 0.1, "{rate}");
}

#[test]
fn separated_gaussians_match_error_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let (sigma, gap, m) = (4.0, 6.0, 20_000);
    let null: Vec<f64> = Normal::new(30.0, sigma).unwrap().sample_iter(&mut rng).take(m).collect();
    let familiar: Vec<f64> = Normal::new(30.0 - gap, sigma).unwrap().sample_iter(&mut rng).take(m).collect();
    let threshold = calibrate_threshold(&null, &familiar).unwrap();
    let accuracy = balanced_accuracy(&null, &familiar, threshold).unwrap();
    let predicted = normal_cdf(gap / (2.0 * sigma));
    let se = (predicted * (1.0 - predicted) / (2.0 * m as f64)).sqrt();
    assert!((accuracy - predicted).abs() < 5.0 * se + 0.01, "{accuracy} vs {predicted}");
}

#[test]
fn identical_distributions_give_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let a: Vec<f64> = (0..4000).map(|_| rng.random_range(0..64) as f64).collect();
    let b: Vec<f64> = (0..4000).map(|_| rng.random_range(0..64) as f64).collect();
    let t = calibrate_threshold(&a, &b).unwrap();
    assert!((balanced_accuracy(&a, &b, t).unwrap() - 0.5).abs() < 0.03);
}

#[test]
fn ingested_clusters_stay_apart() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let (d, clusters, per) = (24, 3, 40);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for item in 0..clusters * per {
        let c = item % clusters;
        labels.push(c);
        // centres on disjoint blocks of coordinates are orthogonal
        for j in 0..d {
            let centre = if j / (d / clusters) == c { 3.0 } else { 0.0 };
            data.push(centre + noise.sample(&mut rng));
        }
    }
    let m = FeatureMatrix::new(clusters * per, d, data).unwrap();
    let stream = ingest_features(&m, 8).unwrap();
    let patterns = stream.patterns();
    let hamming = |a: &[i8], b: &[i8]| a.iter().zip(b).filter(|(x, y)| x != y).count() as f64;
    let (mut within, mut wn, mut between, mut bn) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..patterns.len() {
        for j in i + 1..patterns.len() {
            let h = hamming(&patterns[i], &patterns[j]);
            if labels[i] == labels[j] {
                within += h;
                wn += 1.0;
            } else {
                between += h;
                bn += 1.0;
            }
        }
    }
    assert!(within / wn < between / bn, "{} vs {}", within / wn, between / bn);
}

#[test]
fn signed_feature_keeps_its_sign() {
    // a single balanced ±1 column is its own principal axis
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let rows = 60;
    let mut column: Vec<f64> = (0..rows).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    for i in (1..rows).rev() {
        column.swap(i, rng.random_range(0..=i));
    }
    let stream = ingest_features(&FeatureMatrix::new(rows, 1, column.clone()).unwrap(), 1).unwrap();
    let bits: Vec<f64> = stream.patterns().iter().map(|p| p[0] as f64).collect();
    let agree = bits.iter().zip(&column).all(|(b, c)| b == c);
    let flipped = bits.iter().zip(&column).all(|(b, c)| *b == -c);
    assert!(agree || flipped);
}

#[test]
fn components_split_items_evenly() {
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    let (rows, d) = (61, 6);
    let data: Vec<f64> = (0..rows * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let stream = ingest_features(&FeatureMatrix::new(rows, d, data).unwrap(), 4).unwrap();
    for k in 0..4 {
        let plus = stream.patterns().iter().filter(|p| p[k] == 1).count() as i64;
        assert!((2 * plus - rows as i64).abs() <= 1);
    }
}

#[test]
fn readout_snr_decays_with_age() {
    let cfg = BenchConfig {
        neurons: 48,
        synapse: SynapseModel::Chain(ChainConfig::simple()),
        stream_length: 600,
        probe_ages: vec![0, 8, 32, 128, 256],
        first_probe: 300,
        probe_interval: 10,
        null_probes: 100,
        trials: 4,
        calibration_trials: 2,
        ..BenchConfig::default()
    };
    let series = run_benchmark(&cfg).unwrap();
    let r = &series.r_snr;
    assert!(r[0] > 2.0 * r[r.len() - 1].abs(), "{r:?}");
    assert!(series.io_snr[0] > series.io_snr[series.io_snr.len() - 1]);
}
