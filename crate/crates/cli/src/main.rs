//! Command-line front end: simulate binary datasets, estimate tetrachoric
//! correlations, fit ordinal factor and IRT models, and run the replicated
//! comparison study.
//!
//! Exit codes partition outcomes:
//!   0  clean result
//!   1  analysis completed but diagnosed an anomaly (heywood, nonconvergence,
//!      extreme discrimination), or the data admit no analysis
//!   2  usage error
//!   3  input format error
//!   4  I/O error

use clap::{Parser, Subcommand, ValueEnum};
use heywood_core::data::{BinaryDataset, CsvError};
use heywood_core::irt::{classify_irt, fit_2pl, IrtOptions};
use heywood_core::numeric::SymmetricMatrix;
use heywood_core::ordfa::{
    fit_one_factor, fit_stats, Diagnosis, Estimator, FitOptions, Parameterization,
};
use heywood_core::simgen::{dichotomize, sample_mvn, table1_covariance, SeedSpec};
use heywood_core::study::{
    max_discrimination_histogram, negative_residual_histogram, render_markdown, run_study,
    StudyConfig,
};
use heywood_core::tetra::{acov_tetrachoric, tetrachoric_matrix};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "heywood",
    version,
    about = "One-factor models for binary data three ways: ordinal factor analysis \
             (delta/theta parameterization) on tetrachoric correlations, and 2PL IRT \
             by marginal maximum likelihood, with anomaly diagnostics"
)]
struct Cli {
    /// Base RNG seed (simulate, study)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file for results ("-" = stdout); study treats this as a directory
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Suppress progress notes on stderr
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Delta,
    Theta,
}

impl From<ParamArg> for Parameterization {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::Delta => Parameterization::Delta,
            ParamArg::Theta => Parameterization::Theta,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Wls,
    Wlsmv,
    Uls,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Wls => Estimator::Wls,
            EstimatorArg::Wlsmv => Estimator::Wlsmv,
            EstimatorArg::Uls => Estimator::Uls,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dichotomized multivariate-normal dataset as CSV
    Simulate {
        /// Sample size
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Replication index selecting the random substream
        #[arg(long, default_value_t = 0)]
        replication: u64,
        /// Dichotomization threshold
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        /// Covariance matrix CSV (numeric rows, no header); built-in 4x4 when omitted
        #[arg(long)]
        covariance: Option<PathBuf>,
    },
    /// Estimate thresholds and tetrachoric correlations from a binary CSV
    Tetrachoric {
        /// Input binary CSV
        #[arg(long)]
        input: PathBuf,
        /// Also estimate the asymptotic covariance of the correlations
        #[arg(long)]
        acov: bool,
    },
    /// Fit a one-factor ordinal model to a binary CSV
    FitOrdinal {
        /// Input binary CSV
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        parameterization: ParamArg,
        #[arg(long, value_enum)]
        estimator: EstimatorArg,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-6)]
        grad_tol: f64,
        /// |loading| cutoff for the nonconverged-extreme diagnosis
        #[arg(long, default_value_t = 10.0)]
        extreme_threshold: f64,
    },
    /// Fit a 2PL IRT model to a binary CSV by marginal maximum likelihood
    FitIrt {
        /// Input binary CSV
        #[arg(long)]
        input: PathBuf,
        /// Gauss-Hermite nodes
        #[arg(long, default_value_t = 61)]
        nodes: usize,
        /// |discrimination| cutoff for the extreme flag
        #[arg(long, default_value_t = 10.0)]
        extreme_threshold: f64,
    },
    /// Run the replicated three-approach comparison and write report.json/report.md
    Study {
        #[arg(long, default_value_t = 100)]
        replications: usize,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        /// Covariance matrix CSV (numeric rows, no header); built-in 4x4 when omitted
        #[arg(long)]
        covariance: Option<PathBuf>,
        /// Comma-separated subset of wls,wlsmv,uls
        #[arg(long, value_delimiter = ',', default_values_t = vec![
            String::from("wls"), String::from("wlsmv"), String::from("uls")
        ])]
        estimators: Vec<String>,
        #[arg(long, default_value_t = 10.0)]
        extreme_threshold: f64,
        /// JSON file with a full StudyConfig (overrides the flags above)
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Failures mapped to exit codes.
enum CliError {
    /// exit 1: the analysis itself identified a problem with the data/model
    Analysis(String),
    /// exit 3
    Format(String),
    /// exit 4
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Analysis(_) => 1,
            CliError::Format(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Analysis(m) | CliError::Format(m) | CliError::Io(m) => m,
        }
    }
}

impl From<CsvError> for CliError {
    fn from(e: CsvError) -> Self {
        CliError::Format(e.to_string())
    }
}

impl From<heywood_core::Error> for CliError {
    fn from(e: heywood_core::Error) -> Self {
        CliError::Analysis(e.to_string())
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

/// Binary CSV reader behind the `--input` flags.
fn read_binary_csv(path: &Path) -> Result<BinaryDataset, CliError> {
    let text = read_file(path)?;
    Ok(BinaryDataset::from_csv(&text)?)
}

/// Numeric covariance CSV: square matrix, comma-separated rows, no header.
fn read_covariance_csv(path: &Path) -> Result<SymmetricMatrix, CliError> {
    let text = read_file(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match row {
            Ok(r) => rows.push(r),
            Err(e) => {
                return Err(CliError::Format(format!(
                    "covariance row {}: {e}",
                    i + 1
                )))
            }
        }
    }
    SymmetricMatrix::from_rows(&rows).map_err(|e| CliError::Format(e.to_string()))
}

fn write_output(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) if p.as_os_str() == "-" => {
            print!("{text}");
            Ok(())
        }
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
    }
}

fn emit_json<T: Serialize>(value: &T, output: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_output(&text, output)
}

#[derive(Serialize)]
struct TetrachoricOut {
    taus: Vec<f64>,
    rho: Vec<Vec<f64>>,
    boundary_flags: Vec<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    acov: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct FitOrdinalOut {
    parameterization: Parameterization,
    estimator: Estimator,
    loadings: Vec<f64>,
    residual_variances: Vec<f64>,
    converged: bool,
    diagnosis: Diagnosis,
    /// names of the variables behind the diagnosis
    flagged_variables: Vec<String>,
    iterations: usize,
    discrepancy: f64,
    srmr: f64,
    rmsea_approx: f64,
    approx_flag: bool,
}

#[derive(Serialize)]
struct FitIrtOut {
    discriminations: Vec<f64>,
    difficulties: Vec<f64>,
    loglik: f64,
    converged: bool,
    em_cycles: usize,
    /// names of the items with extreme discriminations
    extreme_items: Vec<String>,
    at_bound_items: Vec<String>,
}

fn full_rho(m: &SymmetricMatrix) -> Vec<Vec<f64>> {
    (0..m.dim())
        .map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect())
        .collect()
}

/// Lower triangle including the diagonal, row by row.
fn flat_lower(m: &SymmetricMatrix) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..m.dim() {
        for j in 0..=i {
            out.push(m.get(i, j));
        }
    }
    out
}

fn names_for(indices: &[usize], names: &[String]) -> Vec<String> {
    indices
        .iter()
        .map(|&i| {
            names
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("Y{}", i + 1))
        })
        .collect()
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let output = cli.output.as_deref();
    match cli.command {
        Command::Simulate {
            n,
            replication,
            threshold,
            covariance,
        } => {
            let cov = match covariance {
                Some(p) => read_covariance_csv(&p)?,
                None => table1_covariance(),
            };
            let seed = SeedSpec::new(cli.seed, replication);
            let continuous = sample_mvn(&cov, n, seed)?;
            let data = dichotomize(&continuous, threshold);
            write_output(&data.to_csv(), output)?;
            Ok(0)
        }
        Command::Tetrachoric { input, acov } => {
            let data = read_binary_csv(&input)?;
            let mut summary = tetrachoric_matrix(&data)?;
            let acov_flat = if acov {
                let m = acov_tetrachoric(&data, &summary)?;
                let flat = flat_lower(&m);
                summary.acov = Some(m);
                Some(flat)
            } else {
                None
            };
            emit_json(
                &TetrachoricOut {
                    taus: summary.taus.clone(),
                    rho: full_rho(&summary.rho),
                    boundary_flags: summary.boundary_flags.clone(),
                    acov: acov_flat,
                },
                output,
            )?;
            Ok(0)
        }
        Command::FitOrdinal {
            input,
            parameterization,
            estimator,
            max_iter,
            grad_tol,
            extreme_threshold,
        } => {
            let data = read_binary_csv(&input)?;
            let mut summary = tetrachoric_matrix(&data)?;
            let est: Estimator = estimator.into();
            if est.needs_acov() {
                summary.acov = Some(acov_tetrachoric(&data, &summary)?);
            }
            let opts = FitOptions {
                max_iter,
                grad_tol,
                extreme_threshold,
                ..FitOptions::default()
            };
            let fit = fit_one_factor(&summary, est, parameterization.into(), &opts)?;
            let stats = fit_stats(&summary, &fit, data.rows());
            let out = FitOrdinalOut {
                parameterization: fit.parameterization,
                estimator: fit.estimator,
                loadings: fit.loadings.clone(),
                residual_variances: fit.implied_residual_variances.clone(),
                converged: fit.converged,
                diagnosis: fit.diagnosis,
                flagged_variables: names_for(&fit.flagged_variables, data.column_names()),
                iterations: fit.iterations,
                discrepancy: fit.discrepancy,
                srmr: stats.srmr,
                rmsea_approx: stats.rmsea_approx,
                approx_flag: stats.approx_flag,
            };
            emit_json(&out, output)?;
            Ok(if fit.diagnosis == Diagnosis::Proper { 0 } else { 1 })
        }
        Command::FitIrt {
            input,
            nodes,
            extreme_threshold,
        } => {
            let data = read_binary_csv(&input)?;
            let opts = IrtOptions {
                n_nodes: nodes,
                extreme_threshold,
                ..IrtOptions::default()
            };
            let fit = fit_2pl(&data, &opts)?;
            let extreme = classify_irt(&fit, extreme_threshold);
            let out = FitIrtOut {
                discriminations: fit.discriminations.clone(),
                difficulties: fit.difficulties.clone(),
                loglik: fit.loglik(),
                converged: fit.converged,
                em_cycles: fit.em_cycles,
                extreme_items: names_for(&extreme, data.column_names()),
                at_bound_items: names_for(&fit.at_bound_items, data.column_names()),
            };
            emit_json(&out, output)?;
            Ok(u8::from(!fit.converged || !extreme.is_empty()))
        }
        Command::Study {
            replications,
            n,
            threshold,
            covariance,
            estimators,
            extreme_threshold,
            config,
        } => {
            let cfg = if let Some(path) = config {
                let text = read_file(&path)?;
                serde_json::from_str::<StudyConfig>(&text)
                    .map_err(|e| CliError::Format(format!("config {}: {e}", path.display())))?
            } else {
                let mut ests = Vec::new();
                for name in &estimators {
                    ests.push(match name.to_ascii_lowercase().as_str() {
                        "wls" => Estimator::Wls,
                        "wlsmv" => Estimator::Wlsmv,
                        "uls" => Estimator::Uls,
                        other => {
                            return Err(CliError::Format(format!(
                                "unknown estimator {other:?} (expected wls, wlsmv, uls)"
                            )))
                        }
                    });
                }
                StudyConfig {
                    replications,
                    n,
                    covariance: match covariance {
                        Some(p) => read_covariance_csv(&p)?,
                        None => table1_covariance(),
                    },
                    threshold,
                    estimators: ests,
                    base_seed: cli.seed,
                    extreme_threshold,
                }
            };
            if !cli.quiet {
                eprintln!(
                    "running {} replications (n = {}, seed = {})...",
                    cfg.replications, cfg.n, cfg.base_seed
                );
            }
            let report = run_study(&cfg)?;

            #[derive(Serialize)]
            struct FullReport<'a> {
                #[serde(flatten)]
                report: &'a heywood_core::study::StudyReport,
                negative_residual_histogram: heywood_core::study::Histogram,
                max_discrimination_histogram: heywood_core::study::Histogram,
            }
            let hist_est = cfg
                .estimators
                .iter()
                .copied()
                .find(|&e| e == Estimator::Wlsmv)
                .unwrap_or(cfg.estimators[0]);
            let full = FullReport {
                report: &report,
                negative_residual_histogram: negative_residual_histogram(&report, hist_est),
                max_discrimination_histogram: max_discrimination_histogram(&report),
            };

            let dir = output.unwrap_or_else(|| Path::new("."));
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
            let json_path = dir.join("report.json");
            let md_path = dir.join("report.md");
            let mut json = serde_json::to_string_pretty(&full)
                .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
            json.push('\n');
            std::fs::write(&json_path, json)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", json_path.display())))?;
            std::fs::write(&md_path, render_markdown(&report))
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", md_path.display())))?;
            if !cli.quiet {
                eprintln!("wrote {} and {}", json_path.display(), md_path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // clap exits with code 2 on usage errors
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
