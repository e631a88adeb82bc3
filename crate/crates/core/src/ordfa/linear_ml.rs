//! Maximum-likelihood one-factor fit for a covariance matrix, with residual
//! variances free in sign. Minimizes
//!     F(lambda, psi) = log|Sigma| + tr(S Sigma^-1) - log|S| - p,
//! Sigma = lambda lambda' + diag(psi), by a ridged Newton iteration with a
//! backtracking line search. Finite-difference Hessian over the analytic
//! gradient; the parameter count (2p) is small enough that this costs
//! nothing.

use crate::error::{Error, Result};
use crate::numeric::SymmetricMatrix;
use serde::{Deserialize, Serialize};

const GRAD_TOL: f64 = 1e-6;
const MAX_ITER: usize = 1000;

/// A converged linear ML factor solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMlFit {
    pub loadings: Vec<f64>,
    /// free-sign residual variances; a negative entry is the Heywood signal
    pub residual_variances: Vec<f64>,
    pub converged: bool,
    pub max_abs_gradient: f64,
    pub iterations: usize,
}

/// p x p dense symmetric inverse and log determinant via Cholesky.
/// Returns None when the matrix is not positive definite.
fn inv_and_logdet(mat: &[f64], p: usize) -> Option<(Vec<f64>, f64)> {
    let mut l = vec![0.0f64; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = mat[i * p + j];
            for k in 0..j {
                sum -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if sum <= 1e-300 {
                    return None;
                }
                l[i * p + i] = sum.sqrt();
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    let logdet = 2.0 * (0..p).map(|i| l[i * p + i].ln()).sum::<f64>();
    // invert by solving L L' X = I column by column
    let mut inv = vec![0.0f64; p * p];
    for col in 0..p {
        let mut x = vec![0.0f64; p];
        x[col] = 1.0;
        for i in 0..p {
            let mut sum = x[i];
            for k in 0..i {
                sum -= l[i * p + k] * x[k];
            }
            x[i] = sum / l[i * p + i];
        }
        for i in (0..p).rev() {
            let mut sum = x[i];
            for k in (i + 1)..p {
                sum -= l[k * p + i] * x[k];
            }
            x[i] = sum / l[i * p + i];
        }
        for i in 0..p {
            inv[i * p + col] = x[i];
        }
    }
    Some((inv, logdet))
}

struct Objective<'a> {
    s: &'a [f64],
    logdet_s: f64,
    p: usize,
}

impl Objective<'_> {
    fn sigma(&self, theta: &[f64]) -> Vec<f64> {
        let p = self.p;
        let (lam, psi) = theta.split_at(p);
        let mut sig = vec![0.0f64; p * p];
        for i in 0..p {
            for j in 0..p {
                sig[i * p + j] = lam[i] * lam[j];
            }
            sig[i * p + i] += psi[i];
        }
        sig
    }

    fn value(&self, theta: &[f64]) -> Option<f64> {
        let p = self.p;
        let sig = self.sigma(theta);
        let (inv, logdet) = inv_and_logdet(&sig, p)?;
        let mut trace = 0.0;
        for i in 0..p {
            for j in 0..p {
                trace += self.s[i * p + j] * inv[j * p + i];
            }
        }
        Some(logdet + trace - self.logdet_s - p as f64)
    }

    /// analytic gradient: with M = Sigma^-1 (Sigma - S) Sigma^-1,
    /// dF/dlambda = 2 M lambda and dF/dpsi_i = M_ii
    fn gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        let p = self.p;
        let (lam, _) = theta.split_at(p);
        let sig = self.sigma(theta);
        let (inv, _) = inv_and_logdet(&sig, p)?;
        // M = inv - inv S inv
        let mut si = vec![0.0f64; p * p]; // S * inv
        for i in 0..p {
            for j in 0..p {
                let mut sum = 0.0;
                for k in 0..p {
                    sum += self.s[i * p + k] * inv[k * p + j];
                }
                si[i * p + j] = sum;
            }
        }
        let mut m = vec![0.0f64; p * p];
        for i in 0..p {
            for j in 0..p {
                let mut sum = 0.0;
                for k in 0..p {
                    sum += inv[i * p + k] * si[k * p + j];
                }
                m[i * p + j] = inv[i * p + j] - sum;
            }
        }
        let mut grad = vec![0.0f64; 2 * p];
        for i in 0..p {
            let mut acc = 0.0;
            for j in 0..p {
                acc += m[i * p + j] * lam[j];
            }
            grad[i] = 2.0 * acc;
            grad[p + i] = m[i * p + i];
        }
        Some(grad)
    }
}

/// Fit the one-factor linear ML model to a positive-definite covariance
/// matrix. Residual variances are unconstrained in sign.
pub fn fit_linear_ml(s: &SymmetricMatrix) -> Result<LinearMlFit> {
    let p = s.dim();
    if p < 3 {
        return Err(Error::InvalidInput(format!(
            "one-factor ML needs p >= 3 variables, got {p}"
        )));
    }
    let mut dense = vec![0.0f64; p * p];
    for i in 0..p {
        for j in 0..p {
            dense[i * p + j] = s.get(i, j);
        }
    }
    let (_, logdet_s) = inv_and_logdet(&dense, p).ok_or_else(|| Error::InvalidInput(
        "covariance matrix is not positive definite".into(),
    ))?;
    let obj = Objective {
        s: &dense,
        logdet_s,
        p,
    };

    // the no-factor point (lambda = 0, psi = diag(S)) is always stationary;
    // when the optimized factor solution cannot beat it, the degenerate
    // solution is the answer (no common variance, e.g. identity input)
    let mut null_theta = vec![0.0f64; 2 * p];
    for i in 0..p {
        null_theta[p + i] = s.get(i, i);
    }
    let null_f = obj
        .value(&null_theta)
        .expect("diagonal of a positive-definite matrix is positive");

    let mut theta = vec![0.0f64; 2 * p];
    for i in 0..p {
        theta[i] = 0.7 * s.get(i, i).sqrt();
        theta[p + i] = 0.5 * s.get(i, i);
    }
    let mut f = obj
        .value(&theta)
        .expect("starting point keeps Sigma positive definite");
    let dim = 2 * p;
    let mut iterations = 0;

    for iter in 1..=MAX_ITER {
        iterations = iter;
        let grad = obj.gradient(&theta).expect("gradient at a feasible point");
        let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm <= GRAD_TOL {
            break;
        }
        // forward-difference Hessian over the analytic gradient
        let h = 1e-6;
        let mut hess = vec![0.0f64; dim * dim];
        for k in 0..dim {
            let mut th = theta.clone();
            th[k] += h;
            let gk = obj.gradient(&th).unwrap_or_else(|| grad.clone());
            for r in 0..dim {
                hess[r * dim + k] = (gk[r] - grad[r]) / h;
            }
        }
        for r in 0..dim {
            for c in 0..r {
                let v = 0.5 * (hess[r * dim + c] + hess[c * dim + r]);
                hess[r * dim + c] = v;
                hess[c * dim + r] = v;
            }
        }
        // ridged Newton direction with backtracking
        let mut ridge = 0.0f64;
        let mut moved = false;
        'outer: for _ in 0..60 {
            let mut a = hess.clone();
            for d in 0..dim {
                a[d * dim + d] += ridge;
            }
            if let Some((ainv, _)) = inv_and_logdet(&a, dim) {
                let mut step = vec![0.0f64; dim];
                for r in 0..dim {
                    let mut sum = 0.0;
                    for c in 0..dim {
                        sum += ainv[r * dim + c] * grad[c];
                    }
                    step[r] = -sum;
                }
                let mut alpha = 1.0;
                for _ in 0..50 {
                    let cand: Vec<f64> = theta
                        .iter()
                        .zip(&step)
                        .map(|(t, d)| t + alpha * d)
                        .collect();
                    if let Some(cf) = obj.value(&cand) {
                        if cf < f {
                            theta = cand;
                            f = cf;
                            moved = true;
                            break 'outer;
                        }
                    }
                    alpha *= 0.5;
                }
            }
            ridge = if ridge == 0.0 { 1e-6 } else { ridge * 10.0 };
            if ridge > 1e12 {
                break;
            }
        }
        if !moved {
            break; // no descent direction found; gradient test decides below
        }
    }

    if null_f <= f + 1e-12 {
        theta = null_theta;
    }
    let grad = obj.gradient(&theta).expect("gradient at the final point");
    let max_abs_gradient = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let converged = max_abs_gradient <= GRAD_TOL;
    if !converged {
        return Err(Error::Nonconvergence {
            what: "linear ML factor fit",
            iterations,
        });
    }
    let (lam, psi) = theta.split_at(p);
    let mut loadings = lam.to_vec();
    if loadings.iter().sum::<f64>() < 0.0 {
        for l in loadings.iter_mut() {
            *l = -*l;
        }
    }
    Ok(LinearMlFit {
        loadings,
        residual_variances: psi.to_vec(),
        converged,
        max_abs_gradient,
        iterations,
    })
}
