use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::FeatureMatrix;
use crate::linalg::{top_components, SymmetricMatrix};

/// A ±1 pattern.
pub type Pattern = Vec<i8>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamSource {
    Random,
    Features,
}

/// An ordered list of ±1 patterns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternStream {
    patterns: Vec<Pattern>,
    n: usize,
    source: StreamSource,
    seed: Option<u64>,
}

impl PatternStream {
    pub fn new(patterns: Vec<Pattern>, source: StreamSource, seed: Option<u64>) -> Result<Self> {
        let n = patterns.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(Error::invalid("a stream needs at least one non-empty pattern"));
        }
        for (i, p) in patterns.iter().enumerate() {
            if p.len() != n {
                return Err(Error::invalid(format!("pattern {i} has length {}, expected {n}", p.len())));
            }
            if p.iter().any(|x| *x != 1 && *x != -1) {
                return Err(Error::invalid(format!("pattern {i} has entries other than ±1")));
            }
        }
        Ok(Self {
            patterns,
            n,
            source,
            seed,
        })
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn into_patterns(self) -> Vec<Pattern> {
        self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Pattern length.
    pub fn width(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> StreamSource {
        self.source
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

pub fn random_pattern(n: usize, rng: &mut impl Rng) -> Pattern {
    (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()
}

/// `t` independent uniform ±1 patterns of length `n`.
pub fn make_random_stream(n: usize, t: usize, seed: u64) -> Result<PatternStream> {
    if n == 0 || t == 0 {
        return Err(Error::invalid("stream width and length must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patterns = (0..t).map(|_| random_pattern(n, &mut rng)).collect();
    PatternStream::new(patterns, StreamSource::Random, Some(seed))
}

/// Projects each row onto the top `n` principal components and binarizes
/// every component at its median (values above the median become +1).
pub fn ingest_features(m: &FeatureMatrix, n: usize) -> Result<PatternStream> {
    if n == 0 {
        return Err(Error::invalid("need at least one output dimension"));
    }
    if m.cols < n {
        return Err(Error::invalid(format!("{} feature columns cannot yield {n} components", m.cols)));
    }
    if m.rows < 2 {
        return Err(Error::invalid("need at least two items"));
    }
    let d = m.cols;
    let mean: Vec<f64> = (0..d)
        .map(|c| (0..m.rows).map(|r| m.row(r)[c]).sum::<f64>() / m.rows as f64)
        .collect();
    let centred: Vec<Vec<f64>> = (0..m.rows)
        .map(|r| m.row(r).iter().zip(&mean).map(|(x, mu)| x - mu).collect())
        .collect();
    let mut cov = vec![0.0; d * d];
    for row in &centred {
        for i in 0..d {
            if row[i] == 0.0 {
                continue;
            }
            for j in i..d {
                cov[i * d + j] += row[i] * row[j];
            }
        }
    }
    let scale = 1.0 / (m.rows - 1) as f64;
    let cov = SymmetricMatrix::from_upper(d, |i, j| cov[i * d + j] * scale)?;

    // usable components carry variance above round-off
    let eig_scale = cov.trace().abs().max(f64::MIN_POSITIVE);
    let comps = top_components(&cov, n)?;
    for (k, v) in comps.iter().enumerate() {
        let var: f64 = centred
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().powi(2))
            .sum::<f64>()
            * scale;
        if var <= 1e-12 * eig_scale {
            return Err(Error::invalid(format!(
                "features have rank {k}, fewer than the {n} requested components"
            )));
        }
    }

    let projected: Vec<Vec<f64>> = centred
        .iter()
        .map(|row| comps.iter().map(|v| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let mut patterns = vec![vec![0i8; n]; m.rows];
    for k in 0..n {
        let mut order: Vec<usize> = (0..m.rows).collect();
        order.sort_by(|&a, &b| projected[a][k].total_cmp(&projected[b][k]).then(a.cmp(&b)));
        // lower half (rank order, ties by item index) becomes -1
        let half = m.rows / 2;
        for (rank, &item) in order.iter().enumerate() {
            patterns[item][k] = if rank < half { -1 } else { 1 };
        }
    }
    PatternStream::new(patterns, StreamSource::Features, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_stream_is_reproducible() {
        let a = make_random_stream(4, 1, 7).unwrap();
        assert_eq!(a, make_random_stream(4, 1, 7).unwrap());
        assert_ne!(
            make_random_stream(16, 4, 1).unwrap().patterns(),
            make_random_stream(16, 4, 2).unwrap().patterns()
        );
        assert!(make_random_stream(0, 1, 0).is_err());
    }

    #[test]
    fn random_stream_is_balanced() {
        let (n, t) = (128, 1000);
        let s = make_random_stream(n, t, 99).unwrap();
        let sum: i64 = s.patterns().iter().flatten().map(|x| *x as i64).sum();
        let mean = sum as f64 / (n * t) as f64;
        assert!(mean.abs() < 3.0 / ((n * t) as f64).sqrt());
    }

    #[test]
    fn median_split_is_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..31 * 6).map(|_| rng.random::<f64>()).collect();
        let m = FeatureMatrix::new(31, 6, data).unwrap();
        let s = ingest_features(&m, 4).unwrap();
        for k in 0..4 {
            let plus = s.patterns().iter().filter(|p| p[k] == 1).count();
            assert!(plus == 15 || plus == 16);
        }
    }

    #[test]
    fn rank_deficiency_rejected() {
        // three columns, all copies of one
        let data: Vec<f64> = (0..10).flat_map(|i| [i as f64; 3]).collect();
        let m = FeatureMatrix::new(10, 3, data).unwrap();
        assert!(matches!(ingest_features(&m, 2), Err(Error::InvalidInput(_))));
        assert!(ingest_features(&m, 4).is_err());
    }
}
