//! Bootstrap oracle for the sandwich asymptotic covariance: the analytic
//! per-pair variances must track the nonparametric bootstrap of the full
//! two-step estimator, and correlations between estimates of independent
//! columns must vanish within bootstrap noise.

use heywood_core::numeric::SymmetricMatrix;
use heywood_core::simgen::{dichotomize, sample_mvn, table1_covariance, SeedSpec, Stream};
use heywood_core::tetra::{acov_tetrachoric, tetrachoric_matrix};

const RESAMPLES: usize = 200;

/// rho vectors (strict lower triangle) of `RESAMPLES` bootstrap resamples.
fn bootstrap_rhos(
    data: &heywood_core::data::BinaryDataset,
    stream: &mut Stream,
) -> Vec<Vec<f64>> {
    let n = data.rows();
    let mut out = Vec::with_capacity(RESAMPLES);
    for _ in 0..RESAMPLES {
        let idx: Vec<usize> = (0..n).map(|_| stream.uniform_index(n)).collect();
        let resampled = data.select_rows(&idx);
        let summary = tetrachoric_matrix(&resampled).expect("resample stays non-degenerate");
        out.push(summary.rho_vector());
    }
    out
}

fn column_variances(samples: &[Vec<f64>]) -> Vec<f64> {
    let m = samples[0].len();
    let b = samples.len() as f64;
    (0..m)
        .map(|k| {
            let mean: f64 = samples.iter().map(|s| s[k]).sum::<f64>() / b;
            samples.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (b - 1.0)
        })
        .collect()
}

#[test]
fn sandwich_variances_match_bootstrap() {
    let data = dichotomize(
        &sample_mvn(&table1_covariance(), 2000, SeedSpec::new(2024, 0)).unwrap(),
        0.0,
    );
    let summary = tetrachoric_matrix(&data).unwrap();
    let acov = acov_tetrachoric(&data, &summary).unwrap();

    let mut stream = Stream::new(SeedSpec::new(2024, 0)).fork(0xB007);
    let rhos = bootstrap_rhos(&data, &mut stream);
    let boot_var = column_variances(&rhos);

    for k in 0..boot_var.len() {
        let analytic = acov.get(k, k);
        let rel = (analytic - boot_var[k]).abs() / boot_var[k];
        assert!(
            rel <= 0.15,
            "pair {k}: sandwich {analytic:.3e} vs bootstrap {:.3e} (rel {rel:.3})",
            boot_var[k]
        );
    }
}

#[test]
fn independent_columns_have_uncorrelated_estimates() {
    let data = dichotomize(
        &sample_mvn(&SymmetricMatrix::identity(3), 2000, SeedSpec::new(2025, 0)).unwrap(),
        0.0,
    );
    let summary = tetrachoric_matrix(&data).unwrap();
    let acov = acov_tetrachoric(&data, &summary).unwrap();

    let mut stream = Stream::new(SeedSpec::new(2025, 0)).fork(0xB007);
    let rhos = bootstrap_rhos(&data, &mut stream);
    let boot_var = column_variances(&rhos);

    // standard error of a covariance between (near-)independent estimates
    let b = RESAMPLES as f64;
    for k in 0..3 {
        for l in 0..k {
            let se = (boot_var[k] * boot_var[l]).sqrt() / b.sqrt();
            assert!(
                acov.get(k, l).abs() <= 3.0 * se,
                "acov[{k}][{l}] = {:.3e} exceeds 3 x bootstrap SE {:.3e}",
                acov.get(k, l),
                se
            );
        }
    }
}
