//! One-factor models for tetrachoric correlation structures.
//!
//! Two parameterizations of the same correlation structure: delta fixes the
//! total latent-response variance at 1 (so residual variance is implied as
//! 1 - lambda^2 and can go negative), theta fixes the residual variance at 1
//! (so implied correlations are lambda_i lambda_j / sqrt((1+lambda_i^2)(1+lambda_j^2))).
//! Least-squares fits (WLS/WLSMV/ULS) run on the unique correlations; the
//! linear maximum-likelihood fit (in `linear_ml`) works on a covariance
//! matrix with free residual variances.

mod least_squares;
mod linear_ml;

pub use least_squares::{discrepancy_and_gradient, fit_one_factor, FitOptions};
pub use linear_ml::{fit_linear_ml, LinearMlFit};

use crate::error::{Error, Result};
use crate::tetra::TetrachoricSummary;
use serde::{Deserialize, Serialize};

/// Identification constraint for the latent response variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameterization {
    /// total latent-response variance fixed at 1
    Delta,
    /// residual variance fixed at 1
    Theta,
}

impl std::fmt::Display for Parameterization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Parameterization::Delta => "delta",
            Parameterization::Theta => "theta",
        })
    }
}

/// Weighting scheme for the least-squares discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// full inverse of the asymptotic covariance
    Wls,
    /// inverse diagonal of the asymptotic covariance
    Wlsmv,
    /// identity weights
    Uls,
}

impl Estimator {
    pub fn needs_acov(self) -> bool {
        !matches!(self, Estimator::Uls)
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::Wls => "wls",
            Estimator::Wlsmv => "wlsmv",
            Estimator::Uls => "uls",
        })
    }
}

/// Outcome classification of a factor fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnosis {
    Proper,
    Heywood,
    NonconvergedExtreme,
    NonconvergedOther,
}

impl std::fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Diagnosis::Proper => "proper",
            Diagnosis::Heywood => "heywood",
            Diagnosis::NonconvergedExtreme => "nonconverged_extreme",
            Diagnosis::NonconvergedOther => "nonconverged_other",
        })
    }
}

/// A fitted one-factor model on tetrachoric correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorFit {
    pub parameterization: Parameterization,
    pub estimator: Estimator,
    pub loadings: Vec<f64>,
    /// delta: 1 - lambda_i^2 (may be negative); theta: fixed 1.0
    pub implied_residual_variances: Vec<f64>,
    /// discrepancy value F at the stopping point
    pub discrepancy: f64,
    /// infinity norm of the gradient of F at the stopping point
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diagnosis: Diagnosis,
    /// 0-based indices of the variables that triggered the diagnosis
    pub flagged_variables: Vec<usize>,
}

/// Heywood detection margin on lambda^2 above 1.
pub const HEYWOOD_TOL: f64 = 1e-8;

/// Loading-magnitude cutoff for calling a nonconverged solution extreme.
pub const DEFAULT_EXTREME_THRESHOLD: f64 = 10.0;

/// Model-implied unique correlations (strict lower triangle, column-major).
pub fn implied_correlations(lambdas: &[f64], param: Parameterization) -> Vec<f64> {
    let p = lambdas.len();
    let g: Vec<f64> = match param {
        Parameterization::Delta => lambdas.to_vec(),
        Parameterization::Theta => lambdas
            .iter()
            .map(|&l| l / (1.0 + l * l).sqrt())
            .collect(),
    };
    let mut out = Vec::with_capacity(p * (p - 1) / 2);
    for j in 0..p {
        for i in (j + 1)..p {
            out.push(g[i] * g[j]);
        }
    }
    out
}

/// Map a delta loading to its theta equivalent. Undefined for |lambda| >= 1.
pub fn delta_to_theta(lambda_delta: f64) -> Result<f64> {
    let sq = lambda_delta * lambda_delta;
    if sq >= 1.0 {
        return Err(Error::HeywoodConversion {
            lambda: lambda_delta,
        });
    }
    Ok((sq / (1.0 - sq)).sqrt().copysign(lambda_delta))
}

/// Map a theta loading to its delta equivalent; always lands in (-1, 1).
pub fn theta_to_delta(lambda_theta: f64) -> f64 {
    let sq = lambda_theta * lambda_theta;
    (sq / (1.0 + sq)).sqrt().copysign(lambda_theta)
}

/// Classify a fit outcome from its loadings and convergence status.
pub fn classify_fit(
    loadings: &[f64],
    converged: bool,
    param: Parameterization,
    extreme_threshold: f64,
) -> (Diagnosis, Vec<usize>) {
    if converged {
        if param == Parameterization::Delta {
            let flagged: Vec<usize> = loadings
                .iter()
                .enumerate()
                .filter(|(_, &l)| l * l > 1.0 + HEYWOOD_TOL)
                .map(|(i, _)| i)
                .collect();
            if !flagged.is_empty() {
                return (Diagnosis::Heywood, flagged);
            }
        }
        (Diagnosis::Proper, Vec::new())
    } else {
        let flagged: Vec<usize> = loadings
            .iter()
            .enumerate()
            .filter(|(_, &l)| l.abs() > extreme_threshold)
            .map(|(i, _)| i)
            .collect();
        if flagged.is_empty() {
            (Diagnosis::NonconvergedOther, Vec::new())
        } else {
            (Diagnosis::NonconvergedExtreme, flagged)
        }
    }
}

/// Approximate fit statistics for a least-squares factor fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub srmr: f64,
    pub chi_square_approx: f64,
    pub df: usize,
    pub rmsea_approx: f64,
    /// true for the least-squares estimators: the chi-square scaling has no
    /// mean/variance adjustment, so RMSEA is indicative only
    pub approx_flag: bool,
}

/// SRMR from raw residuals, and a (N-1)*F chi-square approximation with the
/// matching RMSEA. `n` is the sample size behind the correlations.
pub fn fit_stats(summary: &TetrachoricSummary, fit: &FactorFit, n: usize) -> FitStats {
    let s = summary.rho_vector();
    let sigma = implied_correlations(&fit.loadings, fit.parameterization);
    let m = s.len();
    let sq_sum: f64 = s
        .iter()
        .zip(&sigma)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let srmr = (sq_sum / m as f64).sqrt();
    let p = fit.loadings.len();
    let df = m.saturating_sub(p);
    let t = (n.saturating_sub(1)) as f64 * fit.discrepancy;
    let rmsea = if df == 0 || n <= 1 {
        0.0
    } else {
        ((t - df as f64) / (df as f64 * (n - 1) as f64)).max(0.0).sqrt()
    };
    FitStats {
        srmr,
        chi_square_approx: t,
        df,
        rmsea_approx: rmsea,
        approx_flag: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SymmetricMatrix;

    #[test]
    fn implied_delta_is_product() {
        let sig = implied_correlations(&[0.5, 0.5], Parameterization::Delta);
        assert_eq!(sig, vec![0.25]);
    }

    #[test]
    fn implied_theta_at_unit_loadings() {
        let sig = implied_correlations(&[1.0, 1.0], Parameterization::Theta);
        assert!((sig[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_loading_zeroes_its_row() {
        for param in [Parameterization::Delta, Parameterization::Theta] {
            let sig = implied_correlations(&[0.6, 0.0, 0.8], param);
            // pairs: (1,0), (2,0), (2,1) -> entries with variable 1 are zero
            assert_eq!(sig[0], 0.0);
            assert_eq!(sig[2], 0.0);
            assert!(sig[1] != 0.0);
        }
    }

    #[test]
    fn parameterizations_describe_same_structure() {
        let theta = [0.3, 1.0, 2.5, -0.7];
        let delta: Vec<f64> = theta.iter().map(|&l| theta_to_delta(l)).collect();
        let a = implied_correlations(&theta, Parameterization::Theta);
        let b = implied_correlations(&delta, Parameterization::Delta);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn conversion_examples() {
        assert_eq!(delta_to_theta(0.0).unwrap(), 0.0);
        let at_symmetry = delta_to_theta(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!((at_symmetry - 1.0).abs() < 1e-12);
        assert!(matches!(
            delta_to_theta(1.011),
            Err(Error::HeywoodConversion { .. })
        ));
        assert!(delta_to_theta(1.0).is_err());
        assert!(delta_to_theta(-1.0).is_err());
    }

    #[test]
    fn theta_to_delta_examples() {
        assert!((theta_to_delta(1.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(theta_to_delta(0.0), 0.0);
        // inverse of the conversion at 0.795
        assert!((theta_to_delta(1.3105) - 0.795).abs() < 1e-4);
    }

    #[test]
    fn conversions_are_mutual_inverses() {
        for &l in &[0.1, -0.1, 0.5, -0.5, 0.9, -0.9, 0.99, -0.99] {
            let roundtrip = theta_to_delta(delta_to_theta(l).unwrap());
            assert!(
                (roundtrip - l).abs() < 1e-12,
                "round trip at {l}: {roundtrip}"
            );
        }
    }

    #[test]
    fn delta_to_theta_diverges_near_one() {
        let t = delta_to_theta(0.9999).unwrap();
        assert!(t > 70.0, "theta loading {t}");
        assert!((theta_to_delta(t) - 0.9999).abs() < 1e-10);
    }

    #[test]
    fn theta_to_delta_monotone_and_bounded() {
        let mut prev = theta_to_delta(-200.0);
        let mut l = -200.0;
        while l <= 200.0 {
            let d = theta_to_delta(l);
            assert!(d > -1.0 && d < 1.0);
            assert!(d >= prev);
            prev = d;
            l += 0.5;
        }
    }

    #[test]
    fn classify_published_delta_solution() {
        // converged delta solution with one loading above 1
        let (diag, flagged) = classify_fit(
            &[0.795, 1.011, 0.744, 0.644, 0.672],
            true,
            Parameterization::Delta,
            DEFAULT_EXTREME_THRESHOLD,
        );
        assert_eq!(diag, Diagnosis::Heywood);
        assert_eq!(flagged, vec![1]);
    }

    #[test]
    fn classify_runaway_theta_loading() {
        let (diag, flagged) = classify_fit(
            &[0.9, 14850.40, 0.8, 0.7, 0.75],
            false,
            Parameterization::Theta,
            DEFAULT_EXTREME_THRESHOLD,
        );
        assert_eq!(diag, Diagnosis::NonconvergedExtreme);
        assert_eq!(flagged, vec![1]);
    }

    #[test]
    fn classify_clean_solution() {
        let (diag, flagged) = classify_fit(
            &[0.9, 0.8, 0.5],
            true,
            Parameterization::Theta,
            DEFAULT_EXTREME_THRESHOLD,
        );
        assert_eq!(diag, Diagnosis::Proper);
        assert!(flagged.is_empty());
    }

    #[test]
    fn classify_nonconverged_without_extremes() {
        let (diag, flagged) = classify_fit(
            &[0.9, 0.8, 0.5],
            false,
            Parameterization::Delta,
            DEFAULT_EXTREME_THRESHOLD,
        );
        assert_eq!(diag, Diagnosis::NonconvergedOther);
        assert!(flagged.is_empty());
    }

    fn summary_with_rho(entries: &[(usize, usize, f64)], p: usize) -> TetrachoricSummary {
        let mut rho = SymmetricMatrix::identity(p);
        for &(i, j, v) in entries {
            rho.set(i, j, v);
        }
        TetrachoricSummary::from_population(rho, vec![0.0; p])
    }

    fn synthetic_fit(loadings: Vec<f64>, discrepancy: f64) -> FactorFit {
        let implied = loadings.iter().map(|l| 1.0 - l * l).collect();
        FactorFit {
            parameterization: Parameterization::Delta,
            estimator: Estimator::Uls,
            implied_residual_variances: implied,
            discrepancy,
            gradient_norm: 0.0,
            iterations: 1,
            converged: true,
            diagnosis: Diagnosis::Proper,
            flagged_variables: vec![],
            loadings,
        }
    }

    #[test]
    fn perfect_fit_has_zero_stats() {
        let lam = [0.6, 0.7, 0.8, 0.5];
        let sig = implied_correlations(&lam, Parameterization::Delta);
        let pairs = SymmetricMatrix::strict_lower_pairs(4);
        let entries: Vec<(usize, usize, f64)> = pairs
            .iter()
            .zip(&sig)
            .map(|(&(i, j), &v)| (i, j, v))
            .collect();
        let summary = summary_with_rho(&entries, 4);
        let fit = synthetic_fit(lam.to_vec(), 0.0);
        let stats = fit_stats(&summary, &fit, 200);
        assert_eq!(stats.srmr, 0.0);
        assert_eq!(stats.rmsea_approx, 0.0);
        assert!(stats.approx_flag);
    }

    #[test]
    fn srmr_equals_common_residual() {
        // 5 variables, every unique-pair residual exactly 0.044
        let lam = [0.6, 0.7, 0.8, 0.5, 0.4];
        let sig = implied_correlations(&lam, Parameterization::Delta);
        let pairs = SymmetricMatrix::strict_lower_pairs(5);
        let entries: Vec<(usize, usize, f64)> = pairs
            .iter()
            .zip(&sig)
            .map(|(&(i, j), &v)| (i, j, v + 0.044))
            .collect();
        let summary = summary_with_rho(&entries, 5);
        let fit = synthetic_fit(lam.to_vec(), 0.1);
        let stats = fit_stats(&summary, &fit, 200);
        assert!((stats.srmr - 0.044).abs() < 1e-12, "srmr = {}", stats.srmr);
        assert_eq!(stats.df, 5);
    }

    #[test]
    fn rmsea_truncates_at_zero() {
        let lam = [0.6, 0.7, 0.8, 0.5];
        let sig = implied_correlations(&lam, Parameterization::Delta);
        let pairs = SymmetricMatrix::strict_lower_pairs(4);
        let entries: Vec<(usize, usize, f64)> = pairs
            .iter()
            .zip(&sig)
            .map(|(&(i, j), &v)| (i, j, v))
            .collect();
        let summary = summary_with_rho(&entries, 4);
        // T = 199 * F must fall below df = 2
        let fit = synthetic_fit(lam.to_vec(), 0.005);
        let stats = fit_stats(&summary, &fit, 200);
        assert!(stats.chi_square_approx < stats.df as f64);
        assert_eq!(stats.rmsea_approx, 0.0);
    }
}
