//! Gauss-Hermite quadrature transformed to the standard-normal weight.
//!
//! Nodes and weights come from the Golub-Welsch construction: eigenvalues of
//! the symmetric tridiagonal Jacobi matrix of the Hermite recurrence, with
//! weights from the squared first eigenvector components. The rule is then
//! rescaled so that sum(w_i f(x_i)) approximates E[f(Z)] for Z ~ N(0, 1).

use crate::error::{Error, Result};

pub const MAX_NODES: usize = 501;

/// Quadrature rule for expectations under the standard normal density:
/// nodes ascending, weights positive and summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// sum of w_i * f(x_i)
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Build the n-point rule, 1 <= n <= 501.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_NODES {
        return Err(Error::domain(
            "gauss_hermite",
            format!("node count {n} outside 1..={MAX_NODES}"),
        ));
    }
    if n == 1 {
        return Ok(QuadratureRule {
            nodes: vec![0.0],
            weights: vec![1.0],
        });
    }
    // Jacobi matrix for physicists' Hermite: zero diagonal,
    // off-diagonal sqrt(i/2) for i = 1..n-1.
    let mut diag = vec![0.0f64; n];
    let mut off = (1..n).map(|i| (i as f64 / 2.0).sqrt()).collect::<Vec<_>>();
    let mut first = vec![0.0f64; n];
    first[0] = 1.0;
    tridiag_eigen_first_components(&mut diag, &mut off, &mut first)?;

    let mut pairs: Vec<(f64, f64)> = diag
        .iter()
        .zip(&first)
        .map(|(&t, &q)| (t * std::f64::consts::SQRT_2, q * q))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // squared first components sum to 1 up to rounding; renormalize exactly.
    // Extreme-node weights of very large rules underflow double precision;
    // they are floored at the smallest normal positive value so the strict
    // positivity contract holds.
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Ok(QuadratureRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs
            .iter()
            .map(|p| (p.1 / total).max(f64::MIN_POSITIVE))
            .collect(),
    })
}

/// Implicit-shift QL for a symmetric tridiagonal matrix, accumulating the
/// rotations only into `first` (the first row of the eigenvector matrix).
/// On return `diag` holds the eigenvalues and `first[i]` the first component
/// of the i-th eigenvector.
fn tridiag_eigen_first_components(
    diag: &mut [f64],
    off: &mut [f64],
    first: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    let mut e = vec![0.0f64; n];
    e[..n - 1].copy_from_slice(off);

    for l in 0..n {
        let mut iter = 0;
        loop {
            // find a small off-diagonal to split at
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::domain(
                    "gauss_hermite",
                    "tridiagonal eigensolver failed to converge",
                ));
            }
            // Wilkinson-ish shift from the leading 2x2
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                // rotate the tracked first components
                f = first[i + 1];
                first[i + 1] = s * first[i] + c * f;
                first[i] = c * first[i] - s * f;
            }
            if r == 0.0 && m > l + 1 {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
