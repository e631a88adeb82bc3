//! Tetrachoric correlations: thresholds from margins, pairwise maximum
//! likelihood for the correlation, and the asymptotic covariance of the
//! estimates (in `acov`).
//!
//! Estimation is two-step: each threshold solves its margin equation exactly
//! (tau_i = quantile(1 - p1_i)), then each pairwise correlation maximizes the
//! multinomial likelihood of the 2x2 table with thresholds held fixed. The
//! score in rho has a closed form because the derivative of the bivariate
//! normal rectangle probability with respect to rho is the bivariate density
//! at the thresholds.

mod acov;

pub use acov::acov_tetrachoric;

use crate::data::BinaryDataset;
use crate::error::{Error, Result};
use crate::numeric::{
    bivariate_normal_cdf, bivariate_normal_pdf, std_normal_cdf, std_normal_quantile,
    SymmetricMatrix,
};

/// Correlation estimates are confined to [-RHO_BOUND, RHO_BOUND].
pub const RHO_BOUND: f64 = 0.999;
const BOUNDARY_EPS: f64 = 1e-6;
const SCORE_TOL: f64 = 1e-10;

/// 2x2 cross-tabulation of two binary variables. `nxy` counts rows with
/// x = first index, y = second index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Contingency2x2 {
    pub n00: u64,
    pub n01: u64,
    pub n10: u64,
    pub n11: u64,
}

impl Contingency2x2 {
    pub fn total(&self) -> u64 {
        self.n00 + self.n01 + self.n10 + self.n11
    }

    pub fn transpose(&self) -> Contingency2x2 {
        Contingency2x2 {
            n00: self.n00,
            n01: self.n10,
            n10: self.n01,
            n11: self.n11,
        }
    }
}

/// Cross-tabulate two equal-length binary columns.
pub fn contingency_2x2(x: &[u8], y: &[u8]) -> Contingency2x2 {
    assert_eq!(x.len(), y.len(), "columns must have equal length");
    let mut t = Contingency2x2 {
        n00: 0,
        n01: 0,
        n10: 0,
        n11: 0,
    };
    for (&xi, &yi) in x.iter().zip(y) {
        match (xi, yi) {
            (0, 0) => t.n00 += 1,
            (0, 1) => t.n01 += 1,
            (1, 0) => t.n10 += 1,
            (1, 1) => t.n11 += 1,
            _ => unreachable!("binary data holds only 0/1"),
        }
    }
    t
}

/// Threshold tau with P(V > tau) = p1 for a standard-normal latent response.
pub fn estimate_threshold(p1: f64) -> Result<f64> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::DegenerateMargin {
            column: 0,
            value: if p1 >= 1.0 { 1 } else { 0 },
        });
    }
    std_normal_quantile(1.0 - p1)
}

/// Rectangle probabilities (pi00, pi01, pi10, pi11) of the 2x2 table for
/// thresholds (tx, ty) and latent correlation rho, floored away from zero.
fn cell_probs(tx: f64, ty: f64, rho: f64) -> Result<[f64; 4]> {
    let p00 = bivariate_normal_cdf(tx, ty, rho)?;
    let px = std_normal_cdf(tx);
    let py = std_normal_cdf(ty);
    let floor = 1e-12;
    Ok([
        p00.max(floor),
        (px - p00).max(floor),
        (py - p00).max(floor),
        (1.0 - px - py + p00).max(floor),
    ])
}

/// Pairwise log-likelihood of the table at rho (thresholds fixed).
#[cfg(test)]
fn pair_loglik(t: &Contingency2x2, tx: f64, ty: f64, rho: f64) -> Result<f64> {
    let p = cell_probs(tx, ty, rho)?;
    Ok(t.n00 as f64 * p[0].ln()
        + t.n01 as f64 * p[1].ln()
        + t.n10 as f64 * p[2].ln()
        + t.n11 as f64 * p[3].ln())
}

/// Score dl/drho. The rectangle derivatives are (+phi2, -phi2, -phi2, +phi2).
fn pair_score(t: &Contingency2x2, tx: f64, ty: f64, rho: f64) -> Result<f64> {
    let p = cell_probs(tx, ty, rho)?;
    let phi2 = bivariate_normal_pdf(tx, ty, rho);
    Ok(phi2
        * (t.n00 as f64 / p[0] - t.n01 as f64 / p[1] - t.n10 as f64 / p[2]
            + t.n11 as f64 / p[3]))
}

/// Result of one pairwise estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEstimate {
    pub rho: f64,
    pub tau_x: f64,
    pub tau_y: f64,
    /// true when a zero cell forced a continuity correction or the estimate
    /// landed on the search boundary
    pub boundary: bool,
}

/// Two-step ML estimate for one pair: thresholds from the margins, then rho
/// by safeguarded Newton on the score over [-0.999, 0.999] with bisection
/// fallback. Zero cells get a +0.5 continuity correction and set the
/// boundary flag.
pub fn estimate_tetrachoric_pair(table: &Contingency2x2) -> Result<PairEstimate> {
    if table.total() < 2 {
        return Err(Error::InvalidInput("contingency table needs >= 2 observations".into()));
    }
    let mut cells = [
        table.n00 as f64,
        table.n01 as f64,
        table.n10 as f64,
        table.n11 as f64,
    ];
    let mut boundary = false;
    if cells.iter().any(|&c| c == 0.0) {
        for c in cells.iter_mut() {
            if *c == 0.0 {
                *c = 0.5;
            }
        }
        boundary = true;
    }
    let n: f64 = cells.iter().sum();
    let p1x = (cells[2] + cells[3]) / n;
    let p1y = (cells[1] + cells[3]) / n;
    if !(p1x > 0.0 && p1x < 1.0) || !(p1y > 0.0 && p1y < 1.0) {
        return Err(Error::DegenerateMargin {
            column: if p1x <= 0.0 || p1x >= 1.0 { 0 } else { 1 },
            value: u8::from(p1x >= 1.0 || p1y >= 1.0),
        });
    }
    let tau_x = std_normal_quantile(1.0 - p1x)?;
    let tau_y = std_normal_quantile(1.0 - p1y)?;

    let corrected = Contingency2x2 {
        n00: (cells[0] * 2.0) as u64,
        n01: (cells[1] * 2.0) as u64,
        n10: (cells[2] * 2.0) as u64,
        n11: (cells[3] * 2.0) as u64,
    };
    // doubling all (corrected) cells rescales the score without moving its
    // root, so the corrected table can stay in integer counts
    let score = |rho: f64| pair_score(&corrected, tau_x, tau_y, rho);

    let mut lo = -RHO_BOUND;
    let mut hi = RHO_BOUND;
    let s_lo = score(lo)?;
    let s_hi = score(hi)?;
    // the score is decreasing in rho at the ends when an interior root exists
    let rho = if s_lo <= 0.0 && s_hi <= 0.0 {
        lo
    } else if s_lo >= 0.0 && s_hi >= 0.0 {
        hi
    } else {
        // bracket established: s(lo) > 0 > s(hi)
        let mut x = {
            // starting guess from the cosine approximation of the 2x2 odds
            let or = (cells[0] * cells[3]) / (cells[1] * cells[2]);
            let c = std::f64::consts::PI / (1.0 + or.sqrt());
            c.cos().clamp(-0.9, 0.9)
        };
        let mut s = score(x)?;
        let h = 1e-6;
        for _ in 0..200 {
            if s.abs() <= SCORE_TOL {
                break;
            }
            if s > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let ds = (score(x + h)? - score(x - h)?) / (2.0 * h);
            let newton = if ds.abs() > 1e-300 { x - s / ds } else { f64::NAN };
            x = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            s = score(x)?;
            if hi - lo < 1e-15 {
                break;
            }
        }
        x
    };
    if rho.abs() >= RHO_BOUND - BOUNDARY_EPS {
        boundary = true;
    }
    Ok(PairEstimate {
        rho,
        tau_x,
        tau_y,
        boundary,
    })
}

/// Thresholds, pairwise correlation matrix, optional asymptotic covariance of
/// the stacked unique correlations (strict lower triangle, column-major), and
/// per-pair boundary flags in the same ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct TetrachoricSummary {
    pub taus: Vec<f64>,
    pub rho: SymmetricMatrix,
    pub acov: Option<SymmetricMatrix>,
    pub boundary_flags: Vec<bool>,
}

impl TetrachoricSummary {
    /// Build a summary from known population values (no data, no acov).
    pub fn from_population(rho: SymmetricMatrix, taus: Vec<f64>) -> Self {
        let m = rho.dim() * (rho.dim() - 1) / 2;
        TetrachoricSummary {
            taus,
            rho,
            acov: None,
            boundary_flags: vec![false; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    /// Unique correlations, strict lower triangle column-major.
    pub fn rho_vector(&self) -> Vec<f64> {
        self.rho.strict_lower_column_major()
    }

    pub fn any_boundary(&self) -> bool {
        self.boundary_flags.iter().any(|&b| b)
    }
}

/// Estimate thresholds and all pairwise correlations for a binary dataset.
pub fn tetrachoric_matrix(data: &BinaryDataset) -> Result<TetrachoricSummary> {
    let p = data.cols();
    let n = data.rows();
    let mut taus = Vec::with_capacity(p);
    for j in 0..p {
        let p1 = data.column_mean(j);
        if p1 <= 0.0 || p1 >= 1.0 {
            return Err(Error::DegenerateMargin {
                column: j,
                value: u8::from(p1 >= 1.0),
            });
        }
        taus.push(std_normal_quantile(1.0 - p1)?);
    }
    let mut cols: Vec<Vec<u8>> = vec![Vec::with_capacity(n); p];
    for i in 0..n {
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(data.get(i, j));
        }
    }
    let mut rho = SymmetricMatrix::identity(p);
    let mut flags = Vec::with_capacity(p * (p - 1) / 2);
    for j in 0..p {
        for i in (j + 1)..p {
            let table = contingency_2x2(&cols[i], &cols[j]);
            let est = estimate_tetrachoric_pair(&table)?;
            rho.set(i, j, est.rho);
            flags.push(est.boundary);
        }
    }
    Ok(TetrachoricSummary {
        taus,
        rho,
        acov: None,
        boundary_flags: flags,
    })
}
