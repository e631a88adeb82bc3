//! Symmetric matrices with lower-triangle storage, Cholesky factorization,
//! and the few dense helpers the fitting code needs.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Pivot threshold below which Cholesky declares the matrix not positive definite.
const CHOLESKY_PIVOT_TOL: f64 = 1e-12;

/// A symmetric real matrix. The lower triangle (row-major, `i >= j`) is the
/// authoritative storage; `get(i, j)` mirrors automatically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    dim: usize,
    /// packed lower triangle: entry (i, j) with i >= j lives at i*(i+1)/2 + j
    lower: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        SymmetricMatrix {
            dim,
            lower: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from full rows, checking symmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {dim}",
                    r.len()
                )));
            }
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                let a = rows[i][j];
                let b = rows[j][i];
                if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                m.set(i, j, a);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn idx(i: usize, j: usize) -> usize {
        debug_assert!(i >= j);
        i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.lower[Self::idx(i, j)]
    }

    /// Sets both (i, j) and (j, i).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.lower[Self::idx(i, j)] = value;
    }

    /// Strict lower triangle stacked column-major: for each column j, rows
    /// i = j+1..dim. This is the canonical ordering for vectors of unique
    /// off-diagonal entries throughout the crate.
    pub fn strict_lower_column_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * (self.dim - 1) / 2);
        for j in 0..self.dim {
            for i in (j + 1)..self.dim {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// The (row, col) index pairs matching `strict_lower_column_major`.
    pub fn strict_lower_pairs(dim: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(dim * (dim - 1) / 2);
        for j in 0..dim {
            for i in (j + 1)..dim {
                out.push((i, j));
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.lower.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lower Cholesky factor L with S = L·Lᵀ.
    pub fn cholesky(&self) -> Result<LowerTriangular> {
        let n = self.dim;
        let mut l = vec![0.0; n * (n + 1) / 2];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l[Self::idx(i, k)] * l[Self::idx(j, k)];
                }
                if i == j {
                    if sum <= CHOLESKY_PIVOT_TOL {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: sum });
                    }
                    l[Self::idx(i, i)] = sum.sqrt();
                } else {
                    l[Self::idx(i, j)] = sum / l[Self::idx(j, j)];
                }
            }
        }
        Ok(LowerTriangular { dim: n, data: l })
    }
}

/// A lower-triangular matrix, as produced by Cholesky factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.data[SymmetricMatrix::idx(i, j)]
        } else {
            0.0
        }
    }

    /// L·Lᵀ, for round-trip checks.
    pub fn reconstruct(&self) -> SymmetricMatrix {
        let n = self.dim;
        let mut s = SymmetricMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = 0.0;
                for k in 0..=j {
                    sum += self.get(i, k) * self.get(j, k);
                }
                s.set(i, j, sum);
            }
        }
        s
    }

    /// Solve L x = b in place.
    pub fn solve_forward(&self, b: &mut [f64]) {
        let n = self.dim;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= self.get(i, k) * b[k];
            }
            b[i] = sum / self.get(i, i);
        }
    }

    /// Solve Lᵀ x = b in place.
    pub fn solve_backward(&self, b: &mut [f64]) {
        let n = self.dim;
        assert_eq!(b.len(), n);
        for i in (0..n).rev() {
            let mut sum = b[i];
            for k in (i + 1)..n {
                sum -= self.get(k, i) * b[k];
            }
            b[i] = sum / self.get(i, i);
        }
    }

    /// y = L·x (matrix-vector product).
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        assert_eq!(x.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = 0.0;
            for k in 0..=i {
                sum += self.get(i, k) * x[k];
            }
            y[i] = sum;
        }
        y
    }

    /// Smallest and largest diagonal entries, a cheap conditioning probe.
    pub fn diag_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for i in 0..self.dim {
            let d = self.get(i, i);
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (lo, hi)
    }
}
