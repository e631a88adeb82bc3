//! Two-parameter logistic IRT by marginal maximum likelihood.
//!
//! The marginal likelihood integrates the standard-normal trait out with a
//! Gauss-Hermite rule, and the fit is an EM iteration over collapsed
//! response patterns: the E-step distributes each pattern over the
//! quadrature nodes, the M-step solves one weighted logistic regression per
//! item in slope-intercept form. Two additions keep the iteration usable on
//! data whose likelihood keeps climbing as a discrimination grows without
//! bound (the binary-data analogue of a Heywood case):
//!
//! - step-lengthening: after each cycle, multiples of the EM update
//!   direction are tried and kept when they do not lower the marginal
//!   log-likelihood, which follows the flat ridge far faster than plain EM;
//! - a stalled iteration (log-likelihood flat, parameters still moving)
//!   switches to per-item Newton steps on the marginal log-likelihood
//!   itself, which either lands on an interior optimum or pushes the
//!   discrimination to the soft bound where the iteration can terminate.
//!
//! Every accepted move is monotone in the marginal log-likelihood, so the
//! recorded trace is nondecreasing.

use crate::data::BinaryDataset;
use crate::error::{Error, Result};
use crate::numeric::{gauss_hermite, std_normal_quantile, QuadratureRule};
use serde::{Deserialize, Serialize};

/// Item parameters: P(y = 1 | theta) = 1 / (1 + exp(-a (theta - b))).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemResponseFunction {
    pub a: f64,
    pub b: f64,
}

impl ItemResponseFunction {
    pub fn probability(&self, theta: f64) -> f64 {
        sigmoid(self.a * (theta - self.b))
    }
}

/// Tuning knobs for `fit_2pl`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrtOptions {
    pub n_nodes: usize,
    pub max_cycles: usize,
    /// outer tolerance on the log-likelihood change per cycle
    pub loglik_tol: f64,
    /// outer tolerance on the largest parameter change per cycle
    pub param_tol: f64,
    /// soft bound on |a| and |b|
    pub bound: f64,
    pub extreme_threshold: f64,
}

impl Default for IrtOptions {
    fn default() -> Self {
        IrtOptions {
            n_nodes: 61,
            max_cycles: 500,
            loglik_tol: 1e-6,
            param_tol: 1e-4,
            bound: 50.0,
            extreme_threshold: 10.0,
        }
    }
}

/// A fitted 2PL model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrtFit {
    pub discriminations: Vec<f64>,
    pub difficulties: Vec<f64>,
    /// marginal log-likelihood after each EM cycle (nondecreasing)
    pub marginal_loglik: Vec<f64>,
    pub converged: bool,
    pub em_cycles: usize,
    /// 0-based items with |a| above the extreme threshold
    pub extreme_items: Vec<usize>,
    /// 0-based items whose discrimination sits on the soft bound
    pub at_bound_items: Vec<usize>,
}

impl IrtFit {
    pub fn loglik(&self) -> f64 {
        *self.marginal_loglik.last().expect("trace never empty")
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(x)) without overflow
#[inline]
fn log1pexp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Collapsed response patterns with multiplicities.
struct Patterns {
    rows: Vec<Vec<u8>>,
    counts: Vec<f64>,
    p: usize,
}

fn collapse_patterns(data: &BinaryDataset) -> Patterns {
    use std::collections::HashMap;
    let mut map: HashMap<&[u8], f64> = HashMap::new();
    for i in 0..data.rows() {
        *map.entry(data.row(i)).or_insert(0.0) += 1.0;
    }
    let mut rows: Vec<Vec<u8>> = map.keys().map(|r| r.to_vec()).collect();
    rows.sort();
    let counts = rows.iter().map(|r| map[r.as_slice()]).collect();
    Patterns {
        counts,
        p: data.cols(),
        rows,
    }
}

/// Marginal log-likelihood and per-pattern posterior node weights.
/// posterior[s][q] = P(node q | pattern s).
fn loglik_and_posterior(
    pats: &Patterns,
    a: &[f64],
    b: &[f64],
    rule: &QuadratureRule,
) -> (f64, Vec<Vec<f64>>) {
    let nq = rule.len();
    let p = pats.p;
    // log P_i(x_q) and log (1 - P_i(x_q)) per item and node
    let mut lp1 = vec![0.0f64; p * nq];
    let mut lp0 = vec![0.0f64; p * nq];
    for i in 0..p {
        for (q, &x) in rule.nodes.iter().enumerate() {
            let z = a[i] * (x - b[i]);
            lp1[i * nq + q] = -log1pexp(-z);
            lp0[i * nq + q] = -log1pexp(z);
        }
    }
    let logw: Vec<f64> = rule.weights.iter().map(|w| w.ln()).collect();
    let mut total = 0.0;
    let mut posterior = Vec::with_capacity(pats.rows.len());
    for (s, row) in pats.rows.iter().enumerate() {
        let mut logjoint = vec![0.0f64; nq];
        for (q, lj) in logjoint.iter_mut().enumerate() {
            let mut acc = logw[q];
            for i in 0..p {
                acc += if row[i] == 1 {
                    lp1[i * nq + q]
                } else {
                    lp0[i * nq + q]
                };
            }
            *lj = acc;
        }
        let mx = logjoint.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = logjoint.iter().map(|&v| (v - mx).exp()).sum();
        let lmarg = mx + sum.ln();
        total += pats.counts[s] * lmarg;
        posterior.push(logjoint.iter().map(|&v| (v - lmarg).exp()).collect());
    }
    (total, posterior)
}

/// Marginal log-likelihood of a dataset under given item parameters.
pub fn marginal_loglik(
    data: &BinaryDataset,
    items: &[ItemResponseFunction],
    rule: &QuadratureRule,
) -> f64 {
    assert_eq!(items.len(), data.cols(), "one item per column");
    let pats = collapse_patterns(data);
    let a: Vec<f64> = items.iter().map(|it| it.a).collect();
    let b: Vec<f64> = items.iter().map(|it| it.b).collect();
    loglik_and_posterior(&pats, &a, &b, rule).0
}

/// One weighted logistic regression in slope-intercept form
/// (logit = alpha x + beta): Newton-Raphson on expected counts.
/// Returns (alpha, beta).
fn mstep_item(
    rk: &[f64],
    nk: &[f64],
    nodes: &[f64],
    alpha0: f64,
    beta0: f64,
    bound: f64,
) -> (f64, f64) {
    let mut alpha = alpha0;
    let mut beta = beta0;
    for _ in 0..25 {
        let mut g1 = 0.0;
        let mut g0 = 0.0;
        let mut h11 = 0.0;
        let mut h10 = 0.0;
        let mut h00 = 0.0;
        for (q, &x) in nodes.iter().enumerate() {
            let pq = sigmoid(alpha * x + beta);
            let r = rk[q] - nk[q] * pq;
            g1 += r * x;
            g0 += r;
            let w = nk[q] * pq * (1.0 - pq);
            h11 += w * x * x;
            h10 += w * x;
            h00 += w;
        }
        let det = h11 * h00 - h10 * h10;
        if det < 1e-12 {
            break;
        }
        let da = (h00 * g1 - h10 * g0) / det;
        let db = (-h10 * g1 + h11 * g0) / det;
        alpha += da;
        beta += db;
        if da.abs().max(db.abs()) < 1e-8 {
            break;
        }
    }
    if alpha.abs() >= bound {
        alpha = alpha.clamp(-bound, bound);
        // re-solve the intercept under the clamped slope so the pair stays
        // a coherent stationary point of the weighted regression
        for _ in 0..25 {
            let mut g0 = 0.0;
            let mut h00 = 0.0;
            for (q, &x) in nodes.iter().enumerate() {
                let pq = sigmoid(alpha * x + beta);
                g0 += rk[q] - nk[q] * pq;
                h00 += nk[q] * pq * (1.0 - pq);
            }
            if h00 < 1e-12 {
                break;
            }
            let db = g0 / h00;
            beta += db;
            if db.abs() < 1e-8 {
                break;
            }
        }
    }
    (alpha, beta)
}

/// Analytic gradient of the marginal log-likelihood for item i at the
/// current posterior, with respect to (a_i, b_i).
fn item_marginal_gradient(
    pats: &Patterns,
    posterior: &[Vec<f64>],
    nodes: &[f64],
    a: &[f64],
    b: &[f64],
    item: usize,
) -> [f64; 2] {
    let mut ga = 0.0;
    let mut gb = 0.0;
    for (s, row) in pats.rows.iter().enumerate() {
        let y = row[item] as f64;
        let c = pats.counts[s];
        for (q, &x) in nodes.iter().enumerate() {
            let pq = sigmoid(a[item] * (x - b[item]));
            let r = (y - pq) * c * posterior[s][q];
            ga += r * (x - b[item]);
            gb -= r * a[item];
        }
    }
    [ga, gb]
}

/// Fit the 2PL model by Bock-Aitkin EM over Gauss-Hermite quadrature.
pub fn fit_2pl(data: &BinaryDataset, opts: &IrtOptions) -> Result<IrtFit> {
    let p = data.cols();
    let n = data.rows();
    if n < p {
        return Err(Error::InvalidInput(format!(
            "need at least as many rows ({n}) as items ({p})"
        )));
    }
    for j in 0..p {
        let p1 = data.column_mean(j);
        if p1 <= 0.0 || p1 >= 1.0 {
            return Err(Error::DegenerateMargin {
                column: j,
                value: u8::from(p1 >= 1.0),
            });
        }
    }
    let rule = gauss_hermite(opts.n_nodes)?;
    let pats = collapse_patterns(data);
    let nodes = &rule.nodes;

    let mut a = vec![1.0f64; p];
    let mut b: Vec<f64> = (0..p)
        .map(|j| std_normal_quantile(1.0 - data.column_mean(j)).expect("margins checked above"))
        .collect();

    let (mut ll, mut posterior) = loglik_and_posterior(&pats, &a, &b, &rule);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut cycles = 0;
    let mut stall = 0usize;

    for cycle in 1..=opts.max_cycles {
        cycles = cycle;
        let a_prev = a.clone();
        let b_prev = b.clone();

        // E-step expected counts
        let nq = rule.len();
        let mut nk = vec![0.0f64; nq];
        let mut rk = vec![0.0f64; p * nq];
        for (s, post) in posterior.iter().enumerate() {
            let c = pats.counts[s];
            for q in 0..nq {
                let w = c * post[q];
                nk[q] += w;
                for i in 0..p {
                    if pats.rows[s][i] == 1 {
                        rk[i * nq + q] += w;
                    }
                }
            }
        }
        // M-step
        for i in 0..p {
            let (alpha, beta) = mstep_item(
                &rk[i * nq..(i + 1) * nq],
                &nk,
                nodes,
                a[i],
                -a[i] * b[i],
                opts.bound,
            );
            a[i] = alpha;
            b[i] = if alpha != 0.0 {
                (-beta / alpha).clamp(-opts.bound, opts.bound)
            } else {
                0.0
            };
        }
        let (mut ll_new, mut post_new) = loglik_and_posterior(&pats, &a, &b, &rule);

        // step-lengthening along the EM direction: accept the largest tried
        // multiple that does not lower the marginal log-likelihood
        let da: Vec<f64> = a.iter().zip(&a_prev).map(|(x, y)| x - y).collect();
        let db: Vec<f64> = b.iter().zip(&b_prev).map(|(x, y)| x - y).collect();
        let step_size = da
            .iter()
            .chain(db.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if step_size > 1e-5 {
            for k in [32.0, 16.0, 8.0, 4.0, 2.0] {
                let ca: Vec<f64> = a
                    .iter()
                    .zip(&da)
                    .map(|(x, d)| (x + k * d).clamp(-opts.bound, opts.bound))
                    .collect();
                let cb: Vec<f64> = b
                    .iter()
                    .zip(&db)
                    .map(|(x, d)| (x + k * d).clamp(-opts.bound, opts.bound))
                    .collect();
                let (cll, cpost) = loglik_and_posterior(&pats, &ca, &cb, &rule);
                if cll >= ll_new {
                    a = ca;
                    b = cb;
                    ll_new = cll;
                    post_new = cpost;
                    break;
                }
            }
        }
        posterior = post_new;

        let change = a
            .iter()
            .zip(&a_prev)
            .chain(b.iter().zip(&b_prev))
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let dll = ll_new - ll;
        ll = ll_new;
        trace.push(ll);

        if dll.abs() <= opts.loglik_tol && change <= opts.param_tol {
            converged = true;
            break;
        }
        // stalled: likelihood flat but parameters still drifting along a
        // ridge; polish with per-item Newton on the marginal itself
        stall = if dll.abs() <= 1e-4 && change > opts.param_tol {
            stall + 1
        } else {
            0
        };
        if stall >= 5 || cycle + 2 == opts.max_cycles {
            let (nll, npost) = newton_polish(&pats, nodes, &rule, &mut a, &mut b, ll, opts);
            posterior = npost;
            ll = nll;
            *trace.last_mut().expect("trace nonempty") = ll;
            stall = 0;
        }
    }

    let extreme_items: Vec<usize> = a
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.abs() > opts.extreme_threshold)
        .map(|(i, _)| i)
        .collect();
    let at_bound_items: Vec<usize> = a
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.abs() >= opts.bound)
        .map(|(i, _)| i)
        .collect();
    if !converged {
        let last_change = trace[trace.len() - 1] - trace[trace.len() - 2];
        if last_change.abs() > 1e-4 {
            return Err(Error::Nonconvergence {
                what: "2PL EM",
                iterations: cycles,
            });
        }
    }
    Ok(IrtFit {
        discriminations: a,
        difficulties: b,
        marginal_loglik: trace,
        converged,
        em_cycles: cycles,
        extreme_items,
        at_bound_items,
    })
}

/// Per-item 2-D Newton ascent on the marginal log-likelihood; every accepted
/// step is monotone. Returns the refreshed log-likelihood and posterior.
fn newton_polish(
    pats: &Patterns,
    nodes: &[f64],
    rule: &QuadratureRule,
    a: &mut Vec<f64>,
    b: &mut Vec<f64>,
    mut ll: f64,
    opts: &IrtOptions,
) -> (f64, Vec<Vec<f64>>) {
    let p = pats.p;
    let h = 1e-5;
    let mut posterior = loglik_and_posterior(pats, a, b, rule).1;
    for item in 0..p {
        for _ in 0..8 {
            let g0 = item_marginal_gradient(pats, &posterior, nodes, a, b, item);
            if g0[0].abs().max(g0[1].abs()) < 1e-7 {
                break;
            }
            // finite-difference Hessian columns over the analytic gradient
            let grad_at = |ai: f64, bi: f64| {
                let mut aa = a.clone();
                let mut bb = b.clone();
                aa[item] = ai;
                bb[item] = bi;
                let post = loglik_and_posterior(pats, &aa, &bb, rule).1;
                item_marginal_gradient(pats, &post, nodes, &aa, &bb, item)
            };
            let gpa = grad_at(a[item] + h, b[item]);
            let gma = grad_at(a[item] - h, b[item]);
            let gpb = grad_at(a[item], b[item] + h);
            let gmb = grad_at(a[item], b[item] - h);
            let hxx = (gpa[0] - gma[0]) / (2.0 * h);
            let hyy = (gmb[1] - gpb[1]) / (-2.0 * h);
            let hxy = 0.5 * ((gpa[1] - gma[1]) + (gpb[0] - gmb[0])) / (2.0 * h);
            let mut ridge = 1e-8;
            let mut moved = false;
            for _ in 0..40 {
                // ascent direction from the ridged (negated) Hessian
                let d = (hxx - ridge) * (hyy - ridge) - hxy * hxy;
                if d.abs() > 1e-300 {
                    let sa = -((hyy - ridge) * g0[0] - hxy * g0[1]) / d;
                    let sb = -((hxx - ridge) * g0[1] - hxy * g0[0]) / d;
                    let ca = (a[item] + sa).clamp(-opts.bound, opts.bound);
                    let cb = (b[item] + sb).clamp(-opts.bound, opts.bound);
                    let mut aa = a.clone();
                    let mut bb = b.clone();
                    aa[item] = ca;
                    bb[item] = cb;
                    let (cll, cpost) = loglik_and_posterior(pats, &aa, &bb, rule);
                    if cll >= ll - 1e-12 {
                        *a = aa;
                        *b = bb;
                        ll = cll.max(ll);
                        posterior = cpost;
                        moved = true;
                        break;
                    }
                }
                // growing ridge degrades the step toward plain gradient
                // ascent, which the monotonicity check always accepts once
                // the step is small enough
                ridge *= 10.0;
                if ridge > 1e8 {
                    break;
                }
            }
            if !moved {
                break;
            }
        }
    }
    (ll, posterior)
}

/// Items whose |a| exceeds the threshold.
pub fn classify_irt(fit: &IrtFit, extreme_threshold: f64) -> Vec<usize> {
    fit.discriminations
        .iter()
        .enumerate()
        .filter(|(_, &v)| v.abs() > extreme_threshold)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{SeedSpec, Stream};

    fn items(pairs: &[(f64, f64)]) -> Vec<ItemResponseFunction> {
        pairs
            .iter()
            .map(|&(a, b)| ItemResponseFunction { a, b })
            .collect()
    }

    /// simulate 2PL data from known parameters on a deterministic stream
    fn simulate_2pl(params: &[(f64, f64)], n: usize, seed: SeedSpec) -> BinaryDataset {
        let mut stream = Stream::new(seed);
        let p = params.len();
        let mut values = Vec::with_capacity(n * p);
        for _ in 0..n {
            let theta = stream.standard_normal();
            for &(a, b) in params {
                let prob = sigmoid(a * (theta - b));
                values.push(u8::from(stream.uniform() < prob));
            }
        }
        BinaryDataset::new(n, p, values).unwrap()
    }

    #[test]
    fn zero_discrimination_gives_coin_flip_loglik() {
        let data = simulate_2pl(&[(1.0, 0.0), (1.0, 0.5)], 40, SeedSpec::new(1, 0));
        let rule = gauss_hermite(21).unwrap();
        let ll = marginal_loglik(&data, &items(&[(0.0, 0.3), (0.0, -2.0)]), &rule);
        let want = 40.0 * 2.0 * 0.5f64.ln();
        assert!((ll - want).abs() < 1e-10, "ll = {ll}, want {want}");
    }

    #[test]
    fn single_item_matches_dense_trapezoid_reference() {
        let data = simulate_2pl(&[(1.0, 0.0), (1.5, 0.3)], 60, SeedSpec::new(2, 0));
        let rule = gauss_hermite(61).unwrap();
        let itemset = items(&[(1.0, 0.0), (1.5, 0.3)]);
        let ll = marginal_loglik(&data, &itemset, &rule);
        // trapezoid reference over theta in [-10, 10], 10001 points
        let npts = 10_001usize;
        let lo = -10.0;
        let hi = 10.0;
        let step = (hi - lo) / (npts - 1) as f64;
        let mut reference = 0.0;
        for i in 0..data.rows() {
            let mut acc = 0.0;
            for t in 0..npts {
                let x = lo + t as f64 * step;
                let dens = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let mut lik = dens;
                for (j, it) in itemset.iter().enumerate() {
                    let pq = it.probability(x);
                    lik *= if data.get(i, j) == 1 { pq } else { 1.0 - pq };
                }
                acc += lik * step * if t == 0 || t == npts - 1 { 0.5 } else { 1.0 };
            }
            reference += acc.ln();
        }
        assert!(
            (ll - reference).abs() < 1e-6,
            "quadrature {ll} vs trapezoid {reference}"
        );
    }

    #[test]
    fn duplicating_rows_doubles_loglik() {
        let data = simulate_2pl(&[(1.2, -0.2), (0.8, 0.4), (1.5, 0.0)], 30, SeedSpec::new(3, 0));
        let mut doubled_vals = Vec::new();
        for _ in 0..2 {
            for i in 0..data.rows() {
                doubled_vals.extend_from_slice(data.row(i));
            }
        }
        let doubled = BinaryDataset::new(60, 3, doubled_vals).unwrap();
        let rule = gauss_hermite(41).unwrap();
        let itemset = items(&[(1.0, 0.0), (1.0, 0.5), (1.0, -0.5)]);
        let single = marginal_loglik(&data, &itemset, &rule);
        let double = marginal_loglik(&doubled, &itemset, &rule);
        assert!((double - 2.0 * single).abs() < 1e-9);
    }

    #[test]
    fn parameter_recovery_at_large_n() {
        let truth = [(1.5, -0.5), (1.5, 0.0), (1.5, 0.5), (1.5, 1.0)];
        let data = simulate_2pl(&truth, 5000, SeedSpec::new(4, 0));
        let fit = fit_2pl(&data, &IrtOptions::default()).unwrap();
        assert!(fit.converged);
        for (i, &(a, b)) in truth.iter().enumerate() {
            assert!(
                (fit.discriminations[i] - a).abs() < 0.15,
                "a[{i}] = {} vs {a}",
                fit.discriminations[i]
            );
            assert!(
                (fit.difficulties[i] - b).abs() < 0.15,
                "b[{i}] = {} vs {b}",
                fit.difficulties[i]
            );
        }
    }

    #[test]
    fn em_beats_coarse_grid_search() {
        let truth = [(1.2, -0.3), (0.9, 0.2), (1.6, 0.6), (0.7, -0.8)];
        let data = simulate_2pl(&truth, 50, SeedSpec::new(5, 0));
        let rule = gauss_hermite(61).unwrap();
        let fit = fit_2pl(&data, &IrtOptions::default()).unwrap();
        let em_ll = fit.loglik();

        // cyclic per-item grid descent until no sweep improves
        let a_grid: Vec<f64> = (1..=16).map(|k| 0.25 * k as f64).collect();
        let b_grid: Vec<f64> = (0..=16).map(|k| -2.0 + 0.25 * k as f64).collect();
        let mut best = items(&[(1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (1.0, 0.0)]);
        let mut best_ll = marginal_loglik(&data, &best, &rule);
        loop {
            let mut improved = false;
            for i in 0..4 {
                for &ga in &a_grid {
                    for &gb in &b_grid {
                        let mut cand = best.clone();
                        cand[i] = ItemResponseFunction { a: ga, b: gb };
                        let cll = marginal_loglik(&data, &cand, &rule);
                        if cll > best_ll {
                            best_ll = cll;
                            best = cand;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        assert!(
            em_ll >= best_ll - 1e-6,
            "EM loglik {em_ll} below grid oracle {best_ll}"
        );
    }

    #[test]
    fn trace_is_nondecreasing() {
        let truth = [(2.0, 0.0), (1.0, 0.3), (1.4, -0.4), (0.8, 0.8)];
        let data = simulate_2pl(&truth, 300, SeedSpec::new(6, 0));
        let fit = fit_2pl(&data, &IrtOptions::default()).unwrap();
        for w in fit.marginal_loglik.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "trace decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn gradient_small_at_interior_solution() {
        let truth = [(1.3, -0.2), (0.9, 0.4), (1.1, 0.0), (0.7, -0.6)];
        let data = simulate_2pl(&truth, 400, SeedSpec::new(7, 0));
        let fit = fit_2pl(&data, &IrtOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.at_bound_items.is_empty());
        let rule = gauss_hermite(61).unwrap();
        let h = 1e-4;
        let base: Vec<ItemResponseFunction> = fit
            .discriminations
            .iter()
            .zip(&fit.difficulties)
            .map(|(&a, &b)| ItemResponseFunction { a, b })
            .collect();
        for i in 0..4 {
            for coord in 0..2 {
                let mut up = base.clone();
                let mut dn = base.clone();
                if coord == 0 {
                    up[i].a += h;
                    dn[i].a -= h;
                } else {
                    up[i].b += h;
                    dn[i].b -= h;
                }
                let fd = (marginal_loglik(&data, &up, &rule)
                    - marginal_loglik(&data, &dn, &rule))
                    / (2.0 * h);
                assert!(
                    fd.abs() <= 1e-3,
                    "item {i} coord {coord}: gradient {fd} at the solution"
                );
            }
        }
    }

    #[test]
    fn recoding_one_item_negates_its_discrimination() {
        let truth = [(1.4, -0.1), (1.0, 0.3), (1.2, 0.5), (0.8, -0.5)];
        let data = simulate_2pl(&truth, 600, SeedSpec::new(8, 0));
        // tight tolerances: both runs must land on the shared optimum for
        // the sign symmetry to show at 1e-4
        let opts = IrtOptions {
            loglik_tol: 1e-9,
            param_tol: 1e-6,
            ..IrtOptions::default()
        };
        let fit = fit_2pl(&data, &opts).unwrap();
        // recode item 1
        let mut flipped_vals = Vec::with_capacity(data.rows() * 4);
        for i in 0..data.rows() {
            for j in 0..4 {
                let v = data.get(i, j);
                flipped_vals.push(if j == 1 { 1 - v } else { v });
            }
        }
        let flipped = BinaryDataset::new(data.rows(), 4, flipped_vals).unwrap();
        let refit = fit_2pl(&flipped, &opts).unwrap();
        for j in 0..4 {
            let expect = if j == 1 {
                -fit.discriminations[j]
            } else {
                fit.discriminations[j]
            };
            assert!(
                (refit.discriminations[j] - expect).abs() < 1e-4,
                "item {j}: {} vs expected {expect}",
                refit.discriminations[j]
            );
        }
    }

    #[test]
    fn quadrature_refinement_stability() {
        let truth = [(1.5, -0.2), (1.1, 0.2), (1.8, 0.0), (0.9, 0.6)];
        let data = simulate_2pl(&truth, 500, SeedSpec::new(9, 0));
        let coarse = fit_2pl(&data, &IrtOptions::default()).unwrap();
        let fine = fit_2pl(
            &data,
            &IrtOptions {
                n_nodes: 121,
                ..IrtOptions::default()
            },
        )
        .unwrap();
        for i in 0..4 {
            if coarse.at_bound_items.contains(&i) || fine.at_bound_items.contains(&i) {
                continue;
            }
            assert!(
                (coarse.discriminations[i] - fine.discriminations[i]).abs() <= 0.05,
                "a[{i}] moved: {} vs {}",
                coarse.discriminations[i],
                fine.discriminations[i]
            );
            assert!(
                (coarse.difficulties[i] - fine.difficulties[i]).abs() <= 0.05,
                "b[{i}] moved: {} vs {}",
                coarse.difficulties[i],
                fine.difficulties[i]
            );
        }
    }

    #[test]
    fn classify_published_discriminations() {
        let fit = IrtFit {
            discriminations: vec![2.369, 13.917, 1.903, 1.540, 1.752],
            difficulties: vec![0.463, 0.609, 0.541, 1.647, 1.933],
            marginal_loglik: vec![0.0],
            converged: true,
            em_cycles: 1,
            extreme_items: vec![],
            at_bound_items: vec![],
        };
        assert_eq!(classify_irt(&fit, 10.0), vec![1]);
        assert_eq!(classify_irt(&fit, 1.9), vec![0, 1, 2]);
        let tame = IrtFit {
            discriminations: vec![2.0, 3.0, 1.0],
            ..fit
        };
        assert!(classify_irt(&tame, 10.0).is_empty());
    }

    #[test]
    fn degenerate_column_rejected() {
        let mut values = Vec::new();
        for i in 0..20 {
            values.extend_from_slice(&[(i % 2) as u8, 1, ((i / 3) % 2) as u8]);
        }
        let data = BinaryDataset::new(20, 3, values).unwrap();
        match fit_2pl(&data, &IrtOptions::default()) {
            Err(Error::DegenerateMargin { column, .. }) => assert_eq!(column, 1),
            other => panic!("expected DegenerateMargin, got {other:?}"),
        }
    }
}
