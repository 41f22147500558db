//! Eigen-solver checks against an independent Sturm-count bisection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synapse_cascade::{eig_sym, slowest_timescale, top_components, ChainConfig, Propagator, SymmetricMatrix};

/// Number of eigenvalues of `a` below `x`, from the signs of the pivots of
/// `a - xI` (Sylvester's law of inertia).
fn count_below(a: &[Vec<f64>], x: f64) -> usize {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= x;
    }
    let mut negatives = 0;
    for k in 0..n {
        let mut pivot = m[k][k];
        if pivot == 0.0 {
            pivot = 1e-300;
        }
        if pivot < 0.0 {
            negatives += 1;
        }
        for i in k + 1..n {
            let f = m[i][k] / pivot;
            for j in k + 1..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    negatives
}

/// All eigenvalues, ascending, by bisection on the inertia count.
fn bisection_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let radius = a
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    (0..n)
        .map(|k| {
            let (mut lo, mut hi) = (-radius, radius);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(a, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

fn dense(m: &SymmetricMatrix) -> Vec<Vec<f64>> {
    (0..m.dim()).map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect()).collect()
}

fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
    SymmetricMatrix::from_upper(n, |_, _| rng.random_range(-1.0..1.0)).unwrap()
}

/// `C^-1/2 G C^-1/2` for a chain, built directly from its definition.
fn scaled_chain_matrix(config: &ChainConfig) -> Vec<Vec<f64>> {
    let c = config.capacities();
    let g = config.couplings();
    let k = c.len();
    let mut a = vec![vec![0.0; k]; k];
    for (i, gi) in g.iter().enumerate() {
        a[i][i] -= gi;
        a[i + 1][i + 1] -= gi;
        a[i][i + 1] += gi;
        a[i + 1][i] += gi;
    }
    for i in 0..k {
        for j in 0..k {
            a[i][j] /= (c[i] * c[j]).sqrt();
        }
    }
    a
}

fn cascade4() -> ChainConfig {
    ChainConfig::new(vec![1.0, 1.0, 2.0, 4.0], vec![2f64.powi(-6), 2f64.powi(-7), 2f64.powi(-8)]).unwrap()
}

#[test]
fn random_matrices_match_bisection_and_reconstruct() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [2, 3, 5, 5, 5, 8] {
        let m = random_symmetric(n, &mut rng);
        let e = eig_sym(&m).unwrap();
        let oracle = bisection_eigenvalues(&dense(&m));
        for (a, b) in e.values().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
        let rec = e.reconstruct();
        let err = rec.iter().zip(m.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-10 * m.max_abs());
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|r| e.vector_component(r, i) * e.vector_component(r, j)).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() <= 1e-10);
            }
        }
        assert!(e.values().windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn trace_and_determinant_are_preserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in 2..=6 {
        let m = random_symmetric(n, &mut rng);
        let e = eig_sym(&m).unwrap();
        let sum: f64 = e.values().iter().sum();
        assert!((sum - m.trace()).abs() <= 1e-10);

        // determinant by Gaussian elimination with partial pivoting
        let mut a = dense(&m);
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs())).unwrap();
            if p != k {
                a.swap(p, k);
                det = -det;
            }
            det *= a[k][k];
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
            }
        }
        let product: f64 = e.values().iter().product();
        assert!((product - det).abs() <= 1e-10 * det.abs().max(1.0));
    }
}

#[test]
fn four_compartment_spectrum_matches_oracle() {
    let config = cascade4();
    let p = Propagator::new(&config).unwrap();
    let oracle = bisection_eigenvalues(&scaled_chain_matrix(&config));
    let zero_modes = p.eigenvalues().iter().filter(|l| l.abs() < 1e-9).count();
    assert_eq!(zero_modes, 1);
    for (a, b) in p.eigenvalues().iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
    assert!(p.eigenvalues().iter().filter(|l| l.abs() >= 1e-9).all(|l| *l < 0.0));
    let slowest = -1.0 / oracle[oracle.len() - 2];
    assert!((slowest_timescale(&p).unwrap() - slowest).abs() <= 1e-9 * slowest);
}

#[test]
fn random_chains_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let k = rng.random_range(1..=8);
        let caps = (0..k).map(|_| rng.random_range(0.25..8.0)).collect();
        let gs = (0..k - 1).map(|_| 2f64.powf(rng.random_range(-12.0..0.0))).collect();
        let config = ChainConfig::new(caps, gs).unwrap();
        let p = Propagator::new(&config).unwrap();
        let oracle = bisection_eigenvalues(&scaled_chain_matrix(&config));
        let scale = oracle[0].abs().max(1e-12);
        for (a, b) in p.eigenvalues().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
        }
    }
}

#[test]
fn two_compartment_timescale() {
    let p = Propagator::new(&ChainConfig::new(vec![1.0, 1.0], vec![2f64.powf(-7.5)]).unwrap()).unwrap();
    assert!((slowest_timescale(&p).unwrap() - 2f64.powf(6.5)).abs() < 1e-9);
}

fn projected_variance(cov: &SymmetricMatrix, basis: &[Vec<f64>]) -> f64 {
    let n = cov.dim();
    basis
        .iter()
        .map(|v| (0..n).map(|i| (0..n).map(|j| v[i] * cov.get(i, j) * v[j]).sum::<f64>()).sum::<f64>())
        .sum()
}

fn orthonormalize(mut vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for i in 0..vs.len() {
        for j in 0..i {
            let dot: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
            let vj = vs[j].clone();
            for (x, y) in vs[i].iter_mut().zip(vj) {
                *x -= dot * y;
            }
        }
        let norm = vs[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        vs[i].iter_mut().for_each(|x| *x /= norm);
    }
    vs
}

#[test]
fn top_components_maximize_projected_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (d, n, samples) = (7, 3, 40);
    let data: Vec<Vec<f64>> = (0..samples)
        .map(|_| (0..d).map(|j| rng.random_range(-1.0..1.0) * (1.0 + j as f64)).collect())
        .collect();
    let cov = SymmetricMatrix::from_upper(d, |i, j| {
        data.iter().map(|r| r[i] * r[j]).sum::<f64>() / samples as f64
    })
    .unwrap();
    let top = top_components(&cov, n).unwrap();
    let best = projected_variance(&cov, &top);

    // brute force: random orthonormal 3-frames, each polished by a few
    // steps of power iteration so the search gets close to the optimum
    let mut brute = 0.0f64;
    for _ in 0..2000 {
        let frame = orthonormalize((0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect());
        brute = brute.max(projected_variance(&cov, &frame));
    }
    let mut polished = orthonormalize((0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect());
    for _ in 0..500 {
        polished = orthonormalize(
            polished
                .iter()
                .map(|v| (0..d).map(|i| (0..d).map(|j| cov.get(i, j) * v[j]).sum()).collect())
                .collect(),
        );
    }
    let polished_var = projected_variance(&cov, &polished);
    assert!(brute <= best * (1.0 + 1e-12), "random frame beat the top components");
    assert!((polished_var - best).abs() <= 1e-9 * best);
}

#[test]
fn wide_covariance_top_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = 300;
    let spikes = [50.0, 30.0, 20.0];
    let dirs = orthonormalize((0..3).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect());
    let cov = SymmetricMatrix::from_upper(d, |i, j| {
        let low_rank: f64 = spikes.iter().zip(&dirs).map(|(s, v)| s * v[i] * v[j]).sum();
        low_rank + if i == j { 0.1 } else { 0.0 }
    })
    .unwrap();
    let top = top_components(&cov, 3).unwrap();
    for (v, u) in top.iter().zip(&dirs) {
        let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-8);
    }
}
