//! Dense symmetric eigen-decomposition for the short chains and small
//! covariance matrices this crate works with.
//!
//! The solver is a cyclic Jacobi iteration. It is unconditionally stable for
//! symmetric input and converges quadratically once the off-diagonal mass is
//! small, which for the matrix sizes used here (mostly under 8x8) makes it
//! both simpler and faster than a tridiagonal QR.

use crate::error::{Error, Result};

/// Largest dimension accepted by [`eig_sym`].
pub const MAX_DIM: usize = 256;

/// Iteration cap for the subspace iteration used on matrices wider than
/// [`MAX_DIM`].
pub const MAX_SUBSPACE_ITERATIONS: usize = 1000;

/// Cap on full cyclic sweeps before giving up.
pub const MAX_SWEEPS: usize = 100;

/// A square matrix whose stored entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds a matrix from row-major entries, rejecting anything that is not
    /// square, finite and exactly symmetric.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("matrix dimension must be at least 1"));
        }
        if data.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at ({}, {})",
                pos / dim,
                pos % dim
            )));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(Error::invalid(format!("entries ({i}, {j}) and ({j}, {i}) differ")));
                }
            }
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from the upper triangle produced by `f(i, j)` with `i <= j`.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Self::new(dim, data)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_upper(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::from_upper(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
///
/// Eigenvectors are stored as the columns of a row-major `dim x dim` matrix
/// and normalized so that their first non-negligible component is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    values: Vec<f64>,
    vectors: Vec<f64>,
    dim: usize,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Component `i` of eigenvector `j`, i.e. `E[i][j]`.
    #[inline]
    pub fn vector_component(&self, i: usize, j: usize) -> f64 {
        self.vectors[i * self.dim + j]
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.vector_component(i, j)).collect()
    }

    /// Row-major `E`, columns are eigenvectors.
    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    /// `E diag(values) E^T` as a row-major matrix.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n)
                    .map(|k| self.vector_component(i, k) * self.values[k] * self.vector_component(j, k))
                    .sum();
            }
        }
        out
    }
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
pub fn eig_sym(m: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let n = m.dim();
    if n > MAX_DIM {
        return Err(Error::invalid(format!("dimension {n} exceeds the supported maximum {MAX_DIM}")));
    }
    let mut a = m.as_slice().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let frob2: f64 = a.iter().map(|x| x * x).sum();
    let target = frob2 * f64::EPSILON * f64::EPSILON;
    let mut converged = false;

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q] * a[p * n + q])
            .sum();
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    a[k * n + p] = new_kp;
                    a[p * n + k] = new_kp;
                    a[k * n + q] = new_kq;
                    a[q * n + k] = new_kq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "Jacobi iteration did not converge within {MAX_SWEEPS} sweeps"
        )));
    }

    // stable ascending sort
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));

    let values: Vec<f64> = order.iter().map(|&k| a[k * n + k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (col, &k) in order.iter().enumerate() {
        let scale = (0..n).fold(0.0f64, |mx, i| mx.max(v[i * n + k].abs()));
        let lead = (0..n)
            .map(|i| v[i * n + k])
            .find(|x| x.abs() > 1e-12 * scale)
            .unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[i * n + col] = sign * v[i * n + k];
        }
    }

    Ok(EigenDecomposition { values, vectors, dim: n })
}

/// The `n` eigenvectors with the largest eigenvalues, largest first.
///
/// Matrices up to [`MAX_DIM`] are decomposed directly; wider ones use a
/// shifted block subspace iteration with a Rayleigh-Ritz step.
pub fn top_components(cov: &SymmetricMatrix, n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 || n > cov.dim() {
        return Err(Error::invalid(format!(
            "requested {n} components from a {}-dimensional matrix",
            cov.dim()
        )));
    }
    let d = cov.dim();
    if d <= MAX_DIM {
        let eig = eig_sym(cov)?;
        return Ok((0..n).map(|r| eig.vector(d - 1 - r)).collect());
    }
    subspace_top(cov, n)
}

fn orthonormalize(block: &mut [Vec<f64>]) {
    for j in 0..block.len() {
        for i in 0..j {
            let dot: f64 = block[i].iter().zip(&block[j]).map(|(a, b)| a * b).sum();
            let (head, tail) = block.split_at_mut(j);
            for (x, y) in tail[0].iter_mut().zip(&head[i]) {
                *x -= dot * y;
            }
        }
        let norm = block[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            block[j].iter_mut().for_each(|x| *x /= norm);
        }
    }
}

fn subspace_top(a: &SymmetricMatrix, n: usize) -> Result<Vec<Vec<f64>>> {
    let d = a.dim();
    let b = (n + 8).min(d);
    if b > MAX_DIM {
        return Err(Error::invalid(format!("cannot extract {n} components; at most {} supported", MAX_DIM - 8)));
    }
    // shift to a positive semidefinite operator so the largest eigenvalues dominate
    let shift = (0..d)
        .map(|i| (0..d).map(|j| a.get(i, j).abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let apply = |v: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|i| {
                let row = &a.as_slice()[i * d..(i + 1) * d];
                row.iter().zip(v).map(|(x, y)| x * y).sum::<f64>() + shift * v[i]
            })
            .collect()
    };

    // deterministic, well-spread start vectors
    let mut state = 0x2545_F491_4F6C_DD1Du64;
    let mut block: Vec<Vec<f64>> = (0..b)
        .map(|_| {
            (0..d)
                .map(|_| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect()
        })
        .collect();
    orthonormalize(&mut block);

    let mut previous: Option<Vec<f64>> = None;
    for _ in 0..MAX_SUBSPACE_ITERATIONS {
        let mut next: Vec<Vec<f64>> = block.iter().map(|v| apply(v)).collect();
        orthonormalize(&mut next);
        block = next;

        let images: Vec<Vec<f64>> = block.iter().map(|v| apply(v)).collect();
        let small = SymmetricMatrix::from_upper(b, |i, j| {
            let x: f64 = block[i].iter().zip(&images[j]).map(|(p, q)| p * q).sum();
            let y: f64 = block[j].iter().zip(&images[i]).map(|(p, q)| p * q).sum();
            0.5 * (x + y)
        })?;
        let eig = eig_sym(&small)?;
        let top: Vec<f64> = (0..n).map(|r| eig.values()[b - 1 - r]).collect();
        let done = previous
            .as_ref()
            .is_some_and(|p| p.iter().zip(&top).all(|(x, y)| (x - y).abs() <= 1e-13 * shift.max(1e-300)));
        let rotated: Vec<Vec<f64>> = (0..b)
            .map(|c| {
                (0..d)
                    .map(|i| (0..b).map(|k| block[k][i] * eig.vector_component(k, b - 1 - c)).sum())
                    .collect()
            })
            .collect();
        block = rotated;
        if done {
            block.truncate(n);
            for v in &mut block {
                let lead = v.iter().copied().find(|x| x.abs() > 1e-8).unwrap_or(1.0);
                if lead < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            return Ok(block);
        }
        previous = Some(top);
    }
    Err(Error::NumericalFailure(format!(
        "subspace iteration did not converge within {MAX_SUBSPACE_ITERATIONS} iterations"
    )))
}
