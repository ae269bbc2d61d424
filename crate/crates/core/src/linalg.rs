//! Small dense solvers for kriging systems and covariance factorization.

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Relative pivot size below which a factorization is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-13;

/// Solves `A x = b` for symmetric indefinite (bordered) systems.
///
/// Gaussian elimination with partial pivoting; on a near-zero pivot the
/// solve is repeated with full pivoting before giving up.
pub fn solve(a: &SquareMatrix, b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(a.dim(), b.len(), "dimension mismatch");
    match eliminate(a, b, false) {
        Ok(x) => Ok(x),
        Err(Error::Singular { .. }) => eliminate(a, b, true),
        Err(e) => Err(e),
    }
}

fn eliminate(a: &SquareMatrix, b: &[f64], full: bool) -> Result<Vec<f64>> {
    let n = a.dim();
    let mut m = a.data.clone();
    let mut rhs = b.to_vec();
    // column permutation for full pivoting: position -> original variable
    let mut cols: Vec<usize> = (0..n).collect();
    let threshold = PIVOT_TOLERANCE * a.max_abs().max(f64::MIN_POSITIVE);

    for k in 0..n {
        let (mut pr, mut pc, mut best) = (k, k, m[k * n + k].abs());
        if full {
            for i in k..n {
                for j in k..n {
                    let v = m[i * n + j].abs();
                    if v > best {
                        (pr, pc, best) = (i, j, v);
                    }
                }
            }
        } else {
            for i in k + 1..n {
                let v = m[i * n + k].abs();
                if v > best {
                    (pr, best) = (i, v);
                }
            }
        }
        if !(best > threshold) {
            return Err(Error::Singular { column: k, pivot: best });
        }
        if pr != k {
            for j in 0..n {
                m.swap(k * n + j, pr * n + j);
            }
            rhs.swap(k, pr);
        }
        if pc != k {
            for i in 0..n {
                m.swap(i * n + k, i * n + pc);
            }
            cols.swap(k, pc);
        }
        let pivot = m[k * n + k];
        for i in k + 1..n {
            let factor = m[i * n + k] / pivot;
            if factor == 0.0 {
                continue;
            }
            m[i * n + k] = 0.0;
            for j in k + 1..n {
                m[i * n + j] -= factor * m[k * n + j];
            }
            rhs[i] -= factor * rhs[k];
        }
    }

    let mut y = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k * n + j] * y[j]).sum();
        y[k] = (rhs[k] - s) / m[k * n + k];
    }
    let mut x = vec![0.0; n];
    for (pos, &var) in cols.iter().enumerate() {
        x[var] = y[pos];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear solve produced non-finite values".into()));
    }
    Ok(x)
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factorizes a symmetric positive definite matrix, adding `jitter` to
    /// the diagonal. Returns `None` if a non-positive pivot appears.
    pub fn factor(a: &SquareMatrix, jitter: f64) -> Option<Self> {
        let n = a.dim();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let row_j = &l[j * n..j * n + j];
            let d = a.get(j, j) + jitter - row_j.iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
                l[i * n + j] = (a.get(i, j) - s) / djj;
            }
        }
        Some(Self { n, lower: l })
    }

    /// Tries increasing diagonal jitter, relative to the mean diagonal,
    /// from zero through 1e−10 up to 1e−6.
    pub fn factor_with_jitter(a: &SquareMatrix) -> Result<(Self, f64)> {
        let n = a.dim();
        let scale = if n == 0 {
            1.0
        } else {
            (0..n).map(|i| a.get(i, i).abs()).sum::<f64>() / n as f64
        };
        let mut last = 0.0;
        for rel in [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6] {
            last = rel * scale;
            if let Some(c) = Self::factor(a, last) {
                if rel > 0.0 {
                    log::warn!("covariance factorization needed jitter {last:e}");
                }
                return Ok((c, last));
            }
        }
        Err(Error::Factorization { jitter: last })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `L · g`
    pub fn lower_mul(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..=i).map(|k| self.lower[i * n + k] * g[k]).sum())
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.lower[i * self.n + j]
        }
    }
}
