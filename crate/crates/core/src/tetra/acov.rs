//! Asymptotic covariance of the tetrachoric correlation estimates.
//!
//! The two-step estimator solves a stacked system of estimating equations:
//! one margin score per threshold and one pairwise score per correlation.
//! The covariance of the stacked estimates is the sandwich A^-1 B A^-T / n,
//! where A is the Jacobian of the mean scores and B the score covariance.
//! The system is block lower-triangular (threshold scores do not depend on
//! the correlations, and each pairwise score depends only on its own
//! correlation and its two thresholds), so A inverts in closed form.

use super::{contingency_2x2, Contingency2x2};
use crate::data::BinaryDataset;
use crate::error::{Error, Result};
use crate::numeric::{
    bivariate_normal_cdf, bivariate_normal_pdf, std_normal_cdf, std_normal_pdf, SymmetricMatrix,
};
use crate::tetra::TetrachoricSummary;

const FD_STEP: f64 = 1e-5;
const COND_LIMIT: f64 = 1e12;

/// Margin score d log L_i / d tau for one observation of column i.
fn threshold_score(y: u8, tau: f64) -> f64 {
    let phi = std_normal_pdf(tau);
    if y == 1 {
        -phi / (1.0 - std_normal_cdf(tau))
    } else {
        phi / std_normal_cdf(tau)
    }
}

/// Pairwise score d log pi_cell / d rho for one observation's cell.
fn cell_score(yx: u8, yy: u8, tx: f64, ty: f64, rho: f64) -> Result<f64> {
    let p00 = bivariate_normal_cdf(tx, ty, rho)?;
    let px = std_normal_cdf(tx);
    let py = std_normal_cdf(ty);
    let floor = 1e-12;
    let (sign, cell) = match (yx, yy) {
        (0, 0) => (1.0, p00),
        (0, 1) => (-1.0, px - p00),
        (1, 0) => (-1.0, py - p00),
        _ => (1.0, 1.0 - px - py + p00),
    };
    Ok(sign * bivariate_normal_pdf(tx, ty, rho) / cell.max(floor))
}

/// Mean pairwise score over a table's cells (weighted by counts / n).
fn mean_cell_score(t: &Contingency2x2, tx: f64, ty: f64, rho: f64) -> Result<f64> {
    let n = t.total() as f64;
    Ok((t.n00 as f64 * cell_score(0, 0, tx, ty, rho)?
        + t.n01 as f64 * cell_score(0, 1, tx, ty, rho)?
        + t.n10 as f64 * cell_score(1, 0, tx, ty, rho)?
        + t.n11 as f64 * cell_score(1, 1, tx, ty, rho)?)
        / n)
}

/// Asymptotic covariance of the stacked unique correlations (strict lower
/// triangle, column-major). `summary` must come from the same data and carry
/// no boundary flags.
pub fn acov_tetrachoric(
    data: &BinaryDataset,
    summary: &TetrachoricSummary,
) -> Result<SymmetricMatrix> {
    let p = data.cols();
    let n = data.rows();
    let pairs = SymmetricMatrix::strict_lower_pairs(p);
    let m = pairs.len();
    let dim = p + m;
    if summary.any_boundary() {
        return Err(Error::InvalidInput(
            "asymptotic covariance undefined with boundary-flagged pairs".into(),
        ));
    }

    // per-column score lookup (y = 0, 1) and per-pair cell score lookup
    let mut thr_lut = vec![[0.0f64; 2]; p];
    for (i, lut) in thr_lut.iter_mut().enumerate() {
        lut[0] = threshold_score(0, summary.taus[i]);
        lut[1] = threshold_score(1, summary.taus[i]);
    }
    let mut pair_lut = vec![[[0.0f64; 2]; 2]; m];
    let mut tables = Vec::with_capacity(m);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let (tx, ty) = (summary.taus[i], summary.taus[j]);
        let rho = summary.rho.get(i, j);
        for yx in 0..2u8 {
            for yy in 0..2u8 {
                pair_lut[k][yx as usize][yy as usize] = cell_score(yx, yy, tx, ty, rho)?;
            }
        }
        let x: Vec<u8> = (0..n).map(|r| data.get(r, i)).collect();
        let y: Vec<u8> = (0..n).map(|r| data.get(r, j)).collect();
        tables.push(contingency_2x2(&x, &y));
    }

    // B = mean outer product of per-observation scores
    let mut b = vec![0.0f64; dim * dim];
    let mut g = vec![0.0f64; dim];
    for r in 0..n {
        for i in 0..p {
            g[i] = thr_lut[i][data.get(r, i) as usize];
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            g[p + k] = pair_lut[k][data.get(r, i) as usize][data.get(r, j) as usize];
        }
        for a in 0..dim {
            for c in 0..=a {
                b[a * dim + c] += g[a] * g[c];
            }
        }
    }
    for a in 0..dim {
        for c in 0..=a {
            let v = b[a * dim + c] / n as f64;
            b[a * dim + c] = v;
            b[c * dim + a] = v;
        }
    }

    // Jacobian blocks by central differences of the mean scores
    let h = FD_STEP;
    let mut a_tt = vec![0.0f64; p]; // diagonal of the threshold block
    for i in 0..p {
        let p1 = data.column_mean(i);
        let mean_thr = |tau: f64| p1 * threshold_score(1, tau) + (1.0 - p1) * threshold_score(0, tau);
        a_tt[i] = -(mean_thr(summary.taus[i] + h) - mean_thr(summary.taus[i] - h)) / (2.0 * h);
    }
    let mut a_rr = vec![0.0f64; m]; // diagonal of the correlation block
    let mut a_rt = vec![0.0f64; m * p]; // correlation-by-threshold block
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let (tx, ty) = (summary.taus[i], summary.taus[j]);
        let rho = summary.rho.get(i, j);
        let t = &tables[k];
        a_rr[k] = -(mean_cell_score(t, tx, ty, rho + h)? - mean_cell_score(t, tx, ty, rho - h)?)
            / (2.0 * h);
        a_rt[k * p + i] =
            -(mean_cell_score(t, tx + h, ty, rho)? - mean_cell_score(t, tx - h, ty, rho)?)
                / (2.0 * h);
        a_rt[k * p + j] =
            -(mean_cell_score(t, tx, ty + h, rho)? - mean_cell_score(t, tx, ty - h, rho)?)
                / (2.0 * h);
    }

    // conditioning check on the block-triangular A
    let min_diag = a_tt
        .iter()
        .chain(a_rr.iter())
        .fold(f64::INFINITY, |acc, &v| acc.min(v.abs()));
    let norm_a = {
        // 1-norm by columns: threshold column i collects A_tt[i] and A_rt[., i]
        let mut best = 0.0f64;
        for i in 0..p {
            let col: f64 =
                a_tt[i].abs() + (0..m).map(|k| a_rt[k * p + i].abs()).sum::<f64>();
            best = best.max(col);
        }
        for k in 0..m {
            best = best.max(a_rr[k].abs());
        }
        best
    };
    if min_diag < 1e-300 || norm_a / min_diag > COND_LIMIT {
        return Err(Error::SingularSandwich {
            cond: if min_diag < 1e-300 {
                f64::INFINITY
            } else {
                norm_a / min_diag
            },
        });
    }

    // A^-1 in closed form:
    //   inv_tt = diag(1/a_tt)
    //   inv_rr = diag(1/a_rr)
    //   inv_rt = -inv_rr * A_rt * inv_tt
    let mut inv_rt = vec![0.0f64; m * p];
    for k in 0..m {
        for i in 0..p {
            inv_rt[k * p + i] = -a_rt[k * p + i] / (a_rr[k] * a_tt[i]);
        }
    }

    // rho-block of A^-1 B A^-T / n. Rows p..dim of A^-1 are [inv_rt | inv_rr].
    let row_of_ainv = |k: usize, idx: usize| -> f64 {
        if idx < p {
            inv_rt[k * p + idx]
        } else if idx == p + k {
            1.0 / a_rr[k]
        } else {
            0.0
        }
    };
    let mut acov = SymmetricMatrix::zeros(m);
    // C = A^-1 B restricted to the rho rows
    let mut c = vec![0.0f64; m * dim];
    for k in 0..m {
        for col in 0..dim {
            let mut sum = (1.0 / a_rr[k]) * b[(p + k) * dim + col];
            for i in 0..p {
                sum += inv_rt[k * p + i] * b[i * dim + col];
            }
            c[k * dim + col] = sum;
        }
    }
    for k in 0..m {
        for l in 0..=k {
            let mut sum = 0.0;
            for idx in 0..dim {
                sum += c[k * dim + idx] * row_of_ainv(l, idx);
            }
            acov.set(k, l, sum / n as f64);
        }
    }
    Ok(acov)
}
