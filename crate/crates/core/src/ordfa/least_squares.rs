//! Levenberg-Marquardt minimization of the weighted least-squares
//! discrepancy F(lambda) = (s - sigma(lambda))' W (s - sigma(lambda)).
//!
//! The residual vector is whitened once per weighting scheme so the solver
//! always minimizes a plain sum of squares: W = acov^-1 uses a Cholesky
//! solve against chol(acov), W = diag(acov)^-1 scales by the standard
//! errors, and ULS leaves residuals untouched.
//!
//! Damping uses mu * I with a fixed floor. The floor matters for the theta
//! parameterization: when the discrepancy flattens as a loading grows
//! without bound, an undamped Gauss-Newton step explodes along the flat
//! direction and the solver would jump to a numerically "converged" point at
//! an astronomical loading. With the floor, steps along flat directions stay
//! proportional to the gradient, so runaway loadings grow but keep a
//! nonzero gradient until the iteration cap - which is the observable
//! behavior this fit is meant to surface.

use super::{classify_fit, implied_correlations, FactorFit, Parameterization};
use crate::error::{Error, Result};
use crate::numeric::LowerTriangular;
use crate::ordfa::Estimator;
use crate::tetra::TetrachoricSummary;

/// Damping floor for the Levenberg step (see module docs).
const DAMPING_FLOOR: f64 = 1e-3;
/// Relative F-change threshold that, together with the gradient test,
/// declares convergence.
const REL_F_TOL: f64 = 1e-10;

/// Tuning knobs for `fit_one_factor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// infinity-norm tolerance on the gradient of F
    pub grad_tol: f64,
    /// |lambda| cutoff for the nonconverged-extreme classification
    pub extreme_threshold: f64,
    /// common starting loading, delta parameterization
    pub start_delta: f64,
    /// common starting loading, theta parameterization
    pub start_theta: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 500,
            grad_tol: 1e-6,
            extreme_threshold: super::DEFAULT_EXTREME_THRESHOLD,
            start_delta: 0.5,
            start_theta: 0.7,
        }
    }
}

/// Whitening transform for the residual vector.
enum Whitener {
    Identity,
    /// 1/sqrt(acov_kk) per unique correlation
    Diagonal(Vec<f64>),
    /// chol(acov); residuals are forward-solved against it
    Full(LowerTriangular),
}

impl Whitener {
    fn apply(&self, r: &mut [f64]) {
        match self {
            Whitener::Identity => {}
            Whitener::Diagonal(scale) => {
                for (v, s) in r.iter_mut().zip(scale) {
                    *v *= s;
                }
            }
            Whitener::Full(chol) => chol.solve_forward(r),
        }
    }
}

fn build_whitener(summary: &TetrachoricSummary, est: Estimator) -> Result<Whitener> {
    match est {
        Estimator::Uls => Ok(Whitener::Identity),
        Estimator::Wlsmv => {
            let acov = summary
                .acov
                .as_ref()
                .ok_or(Error::MissingAcov { estimator: "wlsmv" })?;
            let mut scale = Vec::with_capacity(acov.dim());
            for k in 0..acov.dim() {
                let v = acov.get(k, k);
                if v <= 0.0 || !v.is_finite() {
                    return Err(Error::SingularWeight {
                        msg: format!("nonpositive asymptotic variance {v} for pair {k}"),
                    });
                }
                scale.push(1.0 / v.sqrt());
            }
            Ok(Whitener::Diagonal(scale))
        }
        Estimator::Wls => {
            let acov = summary
                .acov
                .as_ref()
                .ok_or(Error::MissingAcov { estimator: "wls" })?;
            let chol = acov.cholesky().map_err(|e| Error::SingularWeight {
                msg: format!("asymptotic covariance not positive definite ({e})"),
            })?;
            // cheap conditioning probe: squared diagonal ratio of the factor
            // bounds the spectral condition number from below
            let (lo, hi) = chol.diag_range();
            let cond_lb = (hi / lo).powi(2);
            if cond_lb > 1e12 {
                return Err(Error::SingularWeight {
                    msg: format!("asymptotic covariance condition at least {cond_lb:.3e}"),
                });
            }
            Ok(Whitener::Full(chol))
        }
    }
}

/// Whitened residuals e = W^(1/2) (s - sigma(lambda)) and Jacobian of e.
fn residuals_and_jacobian(
    s: &[f64],
    lambdas: &[f64],
    param: Parameterization,
    whiten: &Whitener,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = lambdas.len();
    let m = s.len();
    let sigma = implied_correlations(lambdas, param);
    let mut e: Vec<f64> = s.iter().zip(&sigma).map(|(a, b)| a - b).collect();
    whiten.apply(&mut e);

    // g and g' per variable under the active parameterization
    let (g, gp): (Vec<f64>, Vec<f64>) = match param {
        Parameterization::Delta => (lambdas.to_vec(), vec![1.0; p]),
        Parameterization::Theta => (
            lambdas.iter().map(|&l| l / (1.0 + l * l).sqrt()).collect(),
            lambdas
                .iter()
                .map(|&l| (1.0 + l * l).powf(-1.5))
                .collect(),
        ),
    };
    // columns of the Jacobian of e with respect to each loading
    let mut jac: Vec<Vec<f64>> = Vec::with_capacity(p);
    for v in 0..p {
        let mut col = vec![0.0; m];
        let mut k = 0;
        for j in 0..p {
            for i in (j + 1)..p {
                if i == v {
                    col[k] = -gp[v] * g[j];
                } else if j == v {
                    col[k] = -gp[v] * g[i];
                }
                k += 1;
            }
        }
        whiten.apply(&mut col);
        jac.push(col);
    }
    (e, jac)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve (J'J + mu I) delta = -g/2 for the LM step (g = gradient of F).
fn lm_step(jtj: &[Vec<f64>], grad: &[f64], mu: f64) -> Option<Vec<f64>> {
    let p = grad.len();
    // dense symmetric solve by Cholesky
    let mut a = vec![vec![0.0f64; p]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = jtj[i][j] + if i == j { mu } else { 0.0 };
        }
    }
    let mut l = vec![vec![0.0f64; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    let mut x: Vec<f64> = grad.iter().map(|&gi| -0.5 * gi).collect();
    for i in 0..p {
        let mut sum = x[i];
        for k in 0..i {
            sum -= l[i][k] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    for i in (0..p).rev() {
        let mut sum = x[i];
        for k in (i + 1)..p {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    Some(x)
}

/// Discrepancy F and its analytic gradient at a given loading vector, under
/// the same whitening the fit itself uses. Exposed for gradient checks and
/// diagnostics.
pub fn discrepancy_and_gradient(
    summary: &TetrachoricSummary,
    est: Estimator,
    param: Parameterization,
    lambdas: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let whiten = build_whitener(summary, est)?;
    let s = summary.rho_vector();
    let (e, jac) = residuals_and_jacobian(&s, lambdas, param, &whiten);
    let f = dot(&e, &e);
    let grad = jac.iter().map(|col| 2.0 * dot(col, &e)).collect();
    Ok((f, grad))
}

/// Fit a one-factor model to the unique tetrachoric correlations.
///
/// Convergence means: gradient infinity-norm at or below `opts.grad_tol` and
/// relative F change at or below 1e-10, inside `opts.max_iter` iterations.
/// On nonconvergence the loadings at the stopping point are reported.
pub fn fit_one_factor(
    summary: &TetrachoricSummary,
    est: Estimator,
    param: Parameterization,
    opts: &FitOptions,
) -> Result<FactorFit> {
    let p = summary.dim();
    if p < 3 {
        return Err(Error::InvalidInput(format!(
            "one-factor model needs p >= 3 variables, got {p}"
        )));
    }
    let whiten = build_whitener(summary, est)?;
    let s = summary.rho_vector();

    let start = match param {
        Parameterization::Delta => opts.start_delta,
        Parameterization::Theta => opts.start_theta,
    };
    let mut lambdas = vec![start; p];
    let (mut e, mut jac) = residuals_and_jacobian(&s, &lambdas, param, &whiten);
    let mut f = dot(&e, &e);

    let jtj_of = |jac: &[Vec<f64>]| {
        let mut jtj = vec![vec![0.0f64; p]; p];
        for i in 0..p {
            for j in 0..=i {
                let v = dot(&jac[i], &jac[j]);
                jtj[i][j] = v;
                jtj[j][i] = v;
            }
        }
        jtj
    };
    let grad_of = |jac: &[Vec<f64>], e: &[f64]| -> Vec<f64> {
        (0..p).map(|i| 2.0 * dot(&jac[i], e)).collect()
    };

    let mut jtj = jtj_of(&jac);
    let max_diag = (0..p).fold(0.0f64, |acc, i| acc.max(jtj[i][i]));
    let mut mu = (1e-3 * max_diag).max(DAMPING_FLOOR);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_iter {
        iterations = iter;
        let grad = grad_of(&jac, &e);
        let mut rel_change = 0.0;
        let mut accepted = false;
        for _attempt in 0..40 {
            let Some(step) = lm_step(&jtj, &grad, mu) else {
                mu *= 2.0;
                continue;
            };
            let cand: Vec<f64> = lambdas.iter().zip(&step).map(|(l, d)| l + d).collect();
            let (ce, cjac) = residuals_and_jacobian(&s, &cand, param, &whiten);
            let cf = dot(&ce, &ce);
            if cf <= f {
                rel_change = (f - cf) / f.max(1e-300);
                lambdas = cand;
                e = ce;
                jac = cjac;
                f = cf;
                jtj = jtj_of(&jac);
                mu = (mu / 3.0).max(DAMPING_FLOOR);
                accepted = true;
                break;
            }
            mu *= 2.0;
            if mu > 1e100 {
                break;
            }
        }
        if !accepted {
            // no downhill step exists at any damping: stalled
            rel_change = 0.0;
        }
        let grad_now = grad_of(&jac, &e);
        let gnorm = grad_now.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm <= opts.grad_tol && rel_change <= REL_F_TOL {
            converged = true;
            break;
        }
        if !accepted {
            break; // stalled without satisfying the gradient test
        }
    }

    if lambdas.iter().sum::<f64>() < 0.0 {
        for l in lambdas.iter_mut() {
            *l = -*l;
        }
    }
    let grad_final = {
        let g = grad_of(&jac, &e);
        g.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    };
    let (diagnosis, flagged) = classify_fit(&lambdas, converged, param, opts.extreme_threshold);
    let implied_residual_variances = match param {
        Parameterization::Delta => lambdas.iter().map(|l| 1.0 - l * l).collect(),
        Parameterization::Theta => vec![1.0; p],
    };
    Ok(FactorFit {
        parameterization: param,
        estimator: est,
        loadings: lambdas,
        implied_residual_variances,
        discrepancy: f,
        gradient_norm: grad_final,
        iterations,
        converged,
        diagnosis,
        flagged_variables: flagged,
    })
}
