use rand::Rng;
use serde::{Deserialize, Serialize};

use super::array::SynapticArray;
use super::stream::random_pattern;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Familiar,
    Novel,
}

/// Familiar iff the recall distance falls below the threshold.
pub fn fd_decide(distance: usize, threshold: f64) -> Decision {
    if (distance as f64) < threshold {
        Decision::Familiar
    } else {
        Decision::Novel
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator).
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Mean and standard error of a sample.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    (mean(xs), std_dev(xs) / (xs.len() as f64).sqrt())
}

/// Midpoint between the mean null and mean familiar distances.
pub fn calibrate_threshold(null_distances: &[f64], familiar_distances: &[f64]) -> Result<f64> {
    if null_distances.is_empty() || familiar_distances.is_empty() {
        return Err(Error::invalid("threshold calibration needs both samples"));
    }
    Ok(0.5 * (mean(null_distances) + mean(familiar_distances)))
}

/// `(hit rate + correct-rejection rate) / 2` at `threshold`. When the
/// threshold cannot separate the samples because their means coincide, the
/// accuracy is chance.
pub fn balanced_accuracy(null_distances: &[f64], familiar_distances: &[f64], threshold: f64) -> Result<f64> {
    if null_distances.is_empty() || familiar_distances.is_empty() {
        return Err(Error::invalid("accuracy needs both samples"));
    }
    if mean(null_distances) == mean(familiar_distances) {
        return Ok(0.5);
    }
    let hits = familiar_distances.iter().filter(|d| **d < threshold).count() as f64;
    let rejections = null_distances.iter().filter(|d| **d >= threshold).count() as f64;
    Ok(0.5 * (hits / familiar_distances.len() as f64 + rejections / null_distances.len() as f64))
}

/// Two-alternative forced choice: correct if the familiar probe has the
/// smaller distance, a fair coin on ties.
pub fn fc_decide(d_familiar: usize, d_novel: usize, rng: &mut impl Rng) -> bool {
    match d_familiar.cmp(&d_novel) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => rng.random::<bool>(),
    }
}

/// Overlap of `pattern`'s Hebbian update with the current weights, in units
/// of the overlap's spread over `null_probes` random patterns.
pub fn io_snr(array: &SynapticArray, pattern: &[i8], null_probes: usize, rng: &mut impl Rng) -> Result<f64> {
    if null_probes < 2 {
        return Err(Error::invalid("at least two null probes are needed"));
    }
    let signal = array.overlap(pattern)?;
    let null: Vec<f64> = (0..null_probes)
        .map(|_| array.overlap(&random_pattern(array.neurons(), rng)))
        .collect::<Result<_>>()?;
    snr_from_null(signal, &null)
}

pub(crate) fn snr_from_null(signal: f64, null: &[f64]) -> Result<f64> {
    let sd = std_dev(null);
    if !(sd > 0.0) {
        return Err(Error::UndefinedSnr("null overlaps have no spread".into()));
    }
    Ok(signal / sd)
}

/// `(mean(null) - mean(familiar)) / std(null)`.
pub fn r_snr(familiar_distances: &[f64], null_distances: &[f64]) -> Result<f64> {
    if familiar_distances.is_empty() || null_distances.is_empty() {
        return Err(Error::invalid("rSNR needs both samples"));
    }
    let sd = std_dev(null_distances);
    if !(sd > 0.0) {
        return Err(Error::UndefinedSnr("null distances have no spread".into()));
    }
    Ok((mean(null_distances) - mean(familiar_distances)) / sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Fd,
    Fc,
    IoSnr,
    RSnr,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fd" => Ok(Metric::Fd),
            "fc" => Ok(Metric::Fc),
            "iosnr" => Ok(Metric::IoSnr),
            "rsnr" => Ok(Metric::RSnr),
            other => Err(Error::invalid(format!("unknown metric `{other}`"))),
        }
    }
}

/// Per-age averages over trials, with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub ages: Vec<usize>,
    pub io_snr: Vec<f64>,
    pub io_snr_se: Vec<f64>,
    pub r_snr: Vec<f64>,
    pub r_snr_se: Vec<f64>,
    pub fd_accuracy: Vec<f64>,
    pub fd_accuracy_se: Vec<f64>,
    pub fc_accuracy: Vec<f64>,
    pub fc_accuracy_se: Vec<f64>,
    pub trials: usize,
}

impl MetricSeries {
    pub fn values(&self, metric: Metric) -> &[f64] {
        match metric {
            Metric::Fd => &self.fd_accuracy,
            Metric::Fc => &self.fc_accuracy,
            Metric::IoSnr => &self.io_snr,
            Metric::RSnr => &self.r_snr,
        }
    }

    pub fn standard_errors(&self, metric: Metric) -> &[f64] {
        match metric {
            Metric::Fd => &self.fd_accuracy_se,
            Metric::Fc => &self.fc_accuracy_se,
            Metric::IoSnr => &self.io_snr_se,
            Metric::RSnr => &self.r_snr_se,
        }
    }

    pub fn lifetime(&self, metric: Metric, threshold: f64) -> Result<f64> {
        lifetime(&self.ages, self.values(metric), threshold)
    }
}

/// Age at which `values` first drops below `threshold`, linearly
/// interpolated between probed ages; `+inf` if it never does and 0 if it
/// starts below.
pub fn lifetime(ages: &[usize], values: &[f64], threshold: f64) -> Result<f64> {
    if ages.is_empty() || ages.len() != values.len() {
        return Err(Error::invalid("lifetime needs equally long, non-empty ages and values"));
    }
    if values[0] < threshold {
        return Ok(0.0);
    }
    for k in 1..values.len() {
        if values[k] < threshold {
            let (a0, a1) = (ages[k - 1] as f64, ages[k] as f64);
            let (v0, v1) = (values[k - 1], values[k]);
            return Ok(a0 + (a1 - a0) * (v0 - threshold) / (v0 - v1));
        }
    }
    Ok(f64::INFINITY)
}
