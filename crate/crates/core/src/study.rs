//! Replicated comparison of the three fitting approaches on simulated
//! binary data, with a ledger of per-replication outcomes and the aggregate
//! tables the comparison is about: anomaly counts per estimator and
//! parameterization, co-occurrence of delta-fit anomalies with theta-fit
//! nonconvergence, and the distribution of extreme IRT discriminations.

use crate::data::BinaryDataset;
use crate::irt::{fit_2pl, IrtOptions};
use crate::numeric::SymmetricMatrix;
use crate::ordfa::{
    fit_one_factor, Diagnosis, Estimator, FactorFit, FitOptions, Parameterization,
};
use crate::simgen::{dichotomize, sample_mvn, SeedSpec};
use crate::tetra::{acov_tetrachoric, tetrachoric_matrix, TetrachoricSummary};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Study parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub replications: usize,
    pub n: usize,
    pub covariance: SymmetricMatrix,
    pub threshold: f64,
    pub estimators: Vec<Estimator>,
    pub base_seed: u64,
    pub extreme_threshold: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            replications: 100,
            n: 200,
            covariance: crate::simgen::table1_covariance(),
            threshold: 0.0,
            estimators: vec![Estimator::Wls, Estimator::Wlsmv, Estimator::Uls],
            base_seed: 0,
            extreme_threshold: 10.0,
        }
    }
}

impl StudyConfig {
    fn validate(&self) -> crate::Result<()> {
        if self.replications < 1 {
            return Err(crate::Error::InvalidInput("replications must be >= 1".into()));
        }
        if self.n < 10 {
            return Err(crate::Error::InvalidInput("n must be >= 10".into()));
        }
        if self.estimators.is_empty() {
            return Err(crate::Error::InvalidInput("no estimators selected".into()));
        }
        Ok(())
    }
}

/// Outcome of one ordinal fit inside the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OrdinalOutcome {
    Fitted {
        diagnosis: Diagnosis,
        converged: bool,
        iterations: usize,
        loadings: Vec<f64>,
        flagged_variables: Vec<usize>,
    },
    Failed { error: String },
}

impl OrdinalOutcome {
    fn from_fit(fit: &FactorFit) -> Self {
        OrdinalOutcome::Fitted {
            diagnosis: fit.diagnosis,
            converged: fit.converged,
            iterations: fit.iterations,
            loadings: fit.loadings.clone(),
            flagged_variables: fit.flagged_variables.clone(),
        }
    }

    /// heywood or any nonconvergence (errors not included)
    pub fn is_flagged(&self) -> bool {
        matches!(
            self,
            OrdinalOutcome::Fitted {
                diagnosis: Diagnosis::Heywood
                    | Diagnosis::NonconvergedExtreme
                    | Diagnosis::NonconvergedOther,
                ..
            }
        )
    }

    pub fn is_nonconverged(&self) -> bool {
        matches!(
            self,
            OrdinalOutcome::Fitted {
                diagnosis: Diagnosis::NonconvergedExtreme | Diagnosis::NonconvergedOther,
                ..
            }
        )
    }
}

/// Outcome of the IRT fit inside the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IrtOutcome {
    Fitted {
        discriminations: Vec<f64>,
        difficulties: Vec<f64>,
        converged: bool,
        em_cycles: usize,
        extreme_items: Vec<usize>,
        loglik_monotone: bool,
    },
    Failed { error: String },
}

/// Everything recorded for one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: u64,
    /// one entry per (estimator, parameterization), in config order then
    /// delta before theta
    pub ordinal: Vec<(Estimator, Parameterization, OrdinalOutcome)>,
    pub irt: IrtOutcome,
}

impl ReplicationRecord {
    pub fn ordinal_outcome(
        &self,
        est: Estimator,
        param: Parameterization,
    ) -> Option<&OrdinalOutcome> {
        self.ordinal
            .iter()
            .find(|(e, p, _)| *e == est && *p == param)
            .map(|(_, _, o)| o)
    }
}

/// Diagnosis counts for one (estimator, parameterization) cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellCounts {
    pub proper: usize,
    pub heywood: usize,
    pub nonconverged_extreme: usize,
    pub nonconverged_other: usize,
    pub failed: usize,
    /// how often each variable (0-based) was flagged
    pub flag_counts: Vec<usize>,
}

impl CellCounts {
    pub fn total(&self) -> usize {
        self.proper + self.heywood + self.nonconverged_extreme + self.nonconverged_other
            + self.failed
    }

    pub fn problems(&self) -> usize {
        self.heywood + self.nonconverged_extreme + self.nonconverged_other + self.failed
    }
}

/// Per-estimator co-occurrence of delta anomalies with theta nonconvergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoOccurrence {
    pub estimator: Estimator,
    /// replications where the delta fit was heywood or nonconverged
    pub delta_flagged: usize,
    /// of those, how many had a nonconverged theta fit
    pub theta_nonconverged: usize,
    pub rate: Option<f64>,
}

/// IRT aggregates across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrtAggregate {
    pub fitted: usize,
    pub converged: usize,
    pub failed: usize,
    pub monotone_traces: usize,
    /// per-variable count of |a| above the extreme threshold
    pub extreme_counts: Vec<usize>,
    /// per-variable min and max discrimination across fitted replications
    pub discrimination_min: Vec<f64>,
    pub discrimination_max: Vec<f64>,
    /// replications whose largest |a| exceeds the extreme threshold
    pub max_discrimination_over_threshold: usize,
}

/// Simple fixed-width histogram; bin k covers
/// [bin_start + k w, bin_start + (k+1) w).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_start: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn empty(bin_width: f64) -> Self {
        Histogram {
            bin_start: 0.0,
            bin_width,
            counts: Vec::new(),
        }
    }

    fn from_values(values: &[f64], bin_width: f64, align_end: Option<f64>) -> Self {
        if values.is_empty() {
            return Self::empty(bin_width);
        }
        let min = values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        let max = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        // when an end is pinned (the negative-residual histogram ends at 0),
        // bins count down from it; otherwise they start at the floored min
        let bin_start = match align_end {
            Some(end) => end - ((end - min) / bin_width).ceil() * bin_width,
            None => (min / bin_width).floor() * bin_width,
        };
        // a pinned end keeps every bin up to it, even trailing empty ones
        let nbins = match align_end {
            Some(end) => (((end - bin_start) / bin_width).round() as usize).max(1),
            None => (((max - bin_start) / bin_width).floor() as usize + 1).max(1),
        };
        let mut counts = vec![0u64; nbins];
        for &v in values {
            let k = (((v - bin_start) / bin_width).floor() as usize).min(nbins - 1);
            counts[k] += 1;
        }
        Histogram {
            bin_start,
            bin_width,
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Full study output: aggregates plus the per-replication ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub cells: Vec<(Estimator, Parameterization, CellCounts)>,
    pub cooccurrence: Vec<CoOccurrence>,
    pub irt: IrtAggregate,
    pub ledger: Vec<ReplicationRecord>,
}

fn run_replication(config: &StudyConfig, k: u64) -> ReplicationRecord {
    let p = config.covariance.dim();
    let seed = SeedSpec::new(config.base_seed, k);
    let fit_opts = FitOptions {
        extreme_threshold: config.extreme_threshold,
        ..FitOptions::default()
    };
    let irt_opts = IrtOptions {
        extreme_threshold: config.extreme_threshold,
        ..IrtOptions::default()
    };
    let params = [Parameterization::Delta, Parameterization::Theta];

    let fail_all = |error: String| -> ReplicationRecord {
        let mut ordinal = Vec::with_capacity(config.estimators.len() * 2);
        for &e in &config.estimators {
            for &pa in &params {
                ordinal.push((e, pa, OrdinalOutcome::Failed { error: error.clone() }));
            }
        }
        ReplicationRecord {
            replication: k,
            ordinal,
            irt: IrtOutcome::Failed { error },
        }
    };

    let continuous = match sample_mvn(&config.covariance, config.n, seed) {
        Ok(c) => c,
        Err(e) => return fail_all(e.to_string()),
    };
    let data: BinaryDataset = dichotomize(&continuous, config.threshold);
    let mut summary: TetrachoricSummary = match tetrachoric_matrix(&data) {
        Ok(s) => s,
        Err(e) => return fail_all(e.to_string()),
    };
    let needs_acov = config.estimators.iter().any(|e| e.needs_acov());
    let acov_error: Option<String> = if needs_acov {
        match acov_tetrachoric(&data, &summary) {
            Ok(acov) => {
                summary.acov = Some(acov);
                None
            }
            Err(e) => Some(e.to_string()),
        }
    } else {
        None
    };

    let mut ordinal = Vec::with_capacity(config.estimators.len() * 2);
    for &est in &config.estimators {
        for &param in &params {
            let outcome = if est.needs_acov() && summary.acov.is_none() {
                OrdinalOutcome::Failed {
                    error: acov_error.clone().unwrap_or_else(|| "no asymptotic covariance".into()),
                }
            } else {
                match fit_one_factor(&summary, est, param, &fit_opts) {
                    Ok(fit) => OrdinalOutcome::from_fit(&fit),
                    Err(e) => OrdinalOutcome::Failed { error: e.to_string() },
                }
            };
            ordinal.push((est, param, outcome));
        }
    }

    let irt = match fit_2pl(&data, &irt_opts) {
        Ok(fit) => {
            let monotone = fit
                .marginal_loglik
                .windows(2)
                .all(|w| w[1] >= w[0] - 1e-8);
            IrtOutcome::Fitted {
                discriminations: fit.discriminations,
                difficulties: fit.difficulties,
                converged: fit.converged,
                em_cycles: fit.em_cycles,
                extreme_items: fit.extreme_items,
                loglik_monotone: monotone,
            }
        }
        Err(e) => IrtOutcome::Failed { error: e.to_string() },
    };

    let _ = p;
    ReplicationRecord {
        replication: k,
        ordinal,
        irt,
    }
}

/// Run the full comparison. Per-replication failures are recorded in the
/// ledger as outcomes; the study itself only fails on an invalid config.
pub fn run_study(config: &StudyConfig) -> crate::Result<StudyReport> {
    config.validate()?;
    let ledger: Vec<ReplicationRecord> = (0..config.replications as u64)
        .into_par_iter()
        .map(|k| run_replication(config, k))
        .collect();
    Ok(aggregate(config.clone(), ledger))
}

fn aggregate(config: StudyConfig, ledger: Vec<ReplicationRecord>) -> StudyReport {
    let p = config.covariance.dim();
    let params = [Parameterization::Delta, Parameterization::Theta];
    let mut cells = Vec::new();
    for &est in &config.estimators {
        for &param in &params {
            let mut counts = CellCounts {
                flag_counts: vec![0; p],
                ..CellCounts::default()
            };
            for rec in &ledger {
                match rec.ordinal_outcome(est, param) {
                    Some(OrdinalOutcome::Fitted {
                        diagnosis, flagged_variables, ..
                    }) => {
                        match diagnosis {
                            Diagnosis::Proper => counts.proper += 1,
                            Diagnosis::Heywood => counts.heywood += 1,
                            Diagnosis::NonconvergedExtreme => counts.nonconverged_extreme += 1,
                            Diagnosis::NonconvergedOther => counts.nonconverged_other += 1,
                        }
                        for &v in flagged_variables {
                            if v < p {
                                counts.flag_counts[v] += 1;
                            }
                        }
                    }
                    Some(OrdinalOutcome::Failed { .. }) => counts.failed += 1,
                    None => {}
                }
            }
            cells.push((est, param, counts));
        }
    }

    let cooccurrence = config
        .estimators
        .iter()
        .map(|&est| {
            let mut delta_flagged = 0;
            let mut both = 0;
            for rec in &ledger {
                let d = rec.ordinal_outcome(est, Parameterization::Delta);
                let t = rec.ordinal_outcome(est, Parameterization::Theta);
                if let (Some(d), Some(t)) = (d, t) {
                    if d.is_flagged() {
                        delta_flagged += 1;
                        if t.is_nonconverged() {
                            both += 1;
                        }
                    }
                }
            }
            CoOccurrence {
                estimator: est,
                delta_flagged,
                theta_nonconverged: both,
                rate: if delta_flagged > 0 {
                    Some(both as f64 / delta_flagged as f64)
                } else {
                    None
                },
            }
        })
        .collect();

    let mut irt_agg = IrtAggregate {
        fitted: 0,
        converged: 0,
        failed: 0,
        monotone_traces: 0,
        extreme_counts: vec![0; p],
        discrimination_min: vec![f64::INFINITY; p],
        discrimination_max: vec![f64::NEG_INFINITY; p],
        max_discrimination_over_threshold: 0,
    };
    for rec in &ledger {
        match &rec.irt {
            IrtOutcome::Fitted {
                discriminations,
                converged,
                extreme_items,
                loglik_monotone,
                ..
            } => {
                irt_agg.fitted += 1;
                if *converged {
                    irt_agg.converged += 1;
                }
                if *loglik_monotone {
                    irt_agg.monotone_traces += 1;
                }
                for &i in extreme_items {
                    if i < p {
                        irt_agg.extreme_counts[i] += 1;
                    }
                }
                let mut max_abs = 0.0f64;
                for (i, &a) in discriminations.iter().enumerate() {
                    irt_agg.discrimination_min[i] = irt_agg.discrimination_min[i].min(a);
                    irt_agg.discrimination_max[i] = irt_agg.discrimination_max[i].max(a);
                    max_abs = max_abs.max(a.abs());
                }
                if max_abs > config.extreme_threshold {
                    irt_agg.max_discrimination_over_threshold += 1;
                }
            }
            IrtOutcome::Failed { .. } => irt_agg.failed += 1,
        }
    }

    StudyReport {
        config,
        cells,
        cooccurrence,
        irt: irt_agg,
        ledger,
    }
}

impl StudyReport {
    pub fn cell(&self, est: Estimator, param: Parameterization) -> Option<&CellCounts> {
        self.cells
            .iter()
            .find(|(e, p, _)| *e == est && *p == param)
            .map(|(_, _, c)| c)
    }

    pub fn cooccurrence_for(&self, est: Estimator) -> Option<&CoOccurrence> {
        self.cooccurrence.iter().find(|c| c.estimator == est)
    }
}

/// Implied residual variances 1 - lambda^2 of all heywood-flagged variables
/// in delta fits with the given estimator, binned at width 0.02 with the
/// last bin ending at 0. Counts sum to the number of flagged variables.
pub fn negative_residual_histogram(report: &StudyReport, est: Estimator) -> Histogram {
    let mut residuals = Vec::new();
    for rec in &report.ledger {
        if let Some(OrdinalOutcome::Fitted {
            diagnosis: Diagnosis::Heywood,
            loadings,
            flagged_variables,
            ..
        }) = rec.ordinal_outcome(est, Parameterization::Delta)
        {
            for &v in flagged_variables {
                residuals.push(1.0 - loadings[v] * loadings[v]);
            }
        }
    }
    Histogram::from_values(&residuals, 0.02, Some(0.0))
}

/// Largest |a| per fitted replication, binned at width 1.
pub fn max_discrimination_histogram(report: &StudyReport) -> Histogram {
    let maxima: Vec<f64> = report
        .ledger
        .iter()
        .filter_map(|rec| match &rec.irt {
            IrtOutcome::Fitted { discriminations, .. } => Some(
                discriminations
                    .iter()
                    .fold(0.0f64, |m, &a| m.max(a.abs())),
            ),
            IrtOutcome::Failed { .. } => None,
        })
        .collect();
    Histogram::from_values(&maxima, 1.0, None)
}

fn bar(count: u64, scale: u64) -> String {
    let width = if scale == 0 {
        0
    } else {
        ((count * 40) / scale.max(1)) as usize
    };
    "#".repeat(width.max(usize::from(count > 0)))
}

/// Human-readable report: outcome tables, co-occurrence, and the two
/// histograms as text bars.
pub fn render_markdown(report: &StudyReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let cfg = &report.config;
    let names: Vec<String> = (1..=cfg.covariance.dim()).map(|i| format!("Y{i}")).collect();
    writeln!(out, "# Study report").unwrap();
    writeln!(out).unwrap();
    writeln!(
        out,
        "{} replications, n = {}, threshold = {}, seed = {}, extreme threshold = {}",
        cfg.replications, cfg.n, cfg.threshold, cfg.base_seed, cfg.extreme_threshold
    )
    .unwrap();
    writeln!(out).unwrap();
    writeln!(out, "## Ordinal factor fits").unwrap();
    writeln!(out).unwrap();
    writeln!(
        out,
        "| estimator | parameterization | proper | heywood | nonconv (extreme) | nonconv (other) | failed |"
    )
    .unwrap();
    writeln!(out, "|---|---|---|---|---|---|---|").unwrap();
    for (est, param, c) in &report.cells {
        writeln!(
            out,
            "| {est} | {param} | {} | {} | {} | {} | {} |",
            c.proper, c.heywood, c.nonconverged_extreme, c.nonconverged_other, c.failed
        )
        .unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "### Flagged variables per cell").unwrap();
    writeln!(out).unwrap();
    writeln!(out, "| estimator | parameterization | {} |", names.join(" | ")).unwrap();
    writeln!(out, "|---|---|{}|", "---|".repeat(names.len())).unwrap();
    for (est, param, c) in &report.cells {
        let row: Vec<String> = c.flag_counts.iter().map(|v| v.to_string()).collect();
        writeln!(out, "| {est} | {param} | {} |", row.join(" | ")).unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "## Delta-anomaly / theta-nonconvergence co-occurrence").unwrap();
    writeln!(out).unwrap();
    writeln!(
        out,
        "| estimator | delta flagged | of those theta nonconverged | rate |"
    )
    .unwrap();
    writeln!(out, "|---|---|---|---|").unwrap();
    for c in &report.cooccurrence {
        let rate = c
            .rate
            .map(|r| format!("{:.1}%", 100.0 * r))
            .unwrap_or_else(|| "-".into());
        writeln!(
            out,
            "| {} | {} | {} | {} |",
            c.estimator, c.delta_flagged, c.theta_nonconverged, rate
        )
        .unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "## IRT fits").unwrap();
    writeln!(out).unwrap();
    writeln!(
        out,
        "fitted {} / converged {} / failed {}; monotone log-likelihood traces: {}",
        report.irt.fitted, report.irt.converged, report.irt.failed, report.irt.monotone_traces
    )
    .unwrap();
    writeln!(
        out,
        "replications with max |a| > {}: {}",
        report.config.extreme_threshold, report.irt.max_discrimination_over_threshold
    )
    .unwrap();
    writeln!(out).unwrap();
    writeln!(out, "| variable | extreme count | min a | max a |").unwrap();
    writeln!(out, "|---|---|---|---|").unwrap();
    for i in 0..names.len() {
        writeln!(
            out,
            "| {} | {} | {:.3} | {:.3} |",
            names[i],
            report.irt.extreme_counts[i],
            report.irt.discrimination_min[i],
            report.irt.discrimination_max[i]
        )
        .unwrap();
    }
    writeln!(out).unwrap();

    let has_wlsmv = report
        .config
        .estimators
        .contains(&Estimator::Wlsmv);
    if has_wlsmv {
        let h = negative_residual_histogram(report, Estimator::Wlsmv);
        writeln!(out, "## Negative residual variances (delta, wlsmv)").unwrap();
        writeln!(out).unwrap();
        if h.counts.is_empty() {
            writeln!(out, "none observed").unwrap();
        } else {
            let scale = h.counts.iter().copied().max().unwrap_or(1);
            for (k, &c) in h.counts.iter().enumerate() {
                let lo = h.bin_start + k as f64 * h.bin_width;
                writeln!(
                    out,
                    "[{:+.2}, {:+.2})  {:>3}  {}",
                    lo,
                    lo + h.bin_width,
                    c,
                    bar(c, scale)
                )
                .unwrap();
            }
        }
        writeln!(out).unwrap();
    }
    let h = max_discrimination_histogram(report);
    writeln!(out, "## Largest discrimination per replication").unwrap();
    writeln!(out).unwrap();
    if h.counts.is_empty() {
        writeln!(out, "none fitted").unwrap();
    } else {
        let scale = h.counts.iter().copied().max().unwrap_or(1);
        for (k, &c) in h.counts.iter().enumerate() {
            let lo = h.bin_start + k as f64 * h.bin_width;
            writeln!(
                out,
                "[{:>5.1}, {:>5.1})  {:>3}  {}",
                lo,
                lo + h.bin_width,
                c,
                bar(c, scale)
            )
            .unwrap();
        }
    }
    out
}
