//! Multivariate-normal data generation and dichotomization.
//!
//! Randomness comes from a counter-based stream: each (base_seed,
//! replication_index) pair derives an independent substream through an
//! avalanche hash, and every draw is a pure function of (key, counter). This
//! makes replications bit-reproducible regardless of scheduling or the order
//! in which they are generated.

use crate::data::{BinaryDataset, ContinuousDataset};
use crate::error::Result;
use crate::numeric::SymmetricMatrix;
use serde::{Deserialize, Serialize};

/// Identifies one replication's random substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub base_seed: u64,
    pub replication_index: u64,
}

impl SeedSpec {
    pub fn new(base_seed: u64, replication_index: u64) -> Self {
        SeedSpec {
            base_seed,
            replication_index,
        }
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: full-avalanche 64-bit mix.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based uniform stream over (0, 1).
#[derive(Debug, Clone)]
pub struct Stream {
    key: u64,
    counter: u64,
    cached_normal: Option<f64>,
}

impl Stream {
    pub fn new(seed: SeedSpec) -> Self {
        // two mixing rounds decorrelate (base_seed, replication) pairs
        let key = mix64(mix64(seed.base_seed) ^ seed.replication_index.wrapping_mul(GOLDEN));
        Stream {
            key,
            counter: 0,
            cached_normal: None,
        }
    }

    /// An auxiliary stream for a named purpose (e.g. bootstrap resampling)
    /// that never collides with the main draw sequence.
    pub fn fork(&self, tag: u64) -> Stream {
        Stream {
            key: mix64(self.key ^ mix64(tag)),
            counter: 0,
            cached_normal: None,
        }
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let v = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
        self.counter += 1;
        v
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Uniform integer in [0, bound) by rejection-free scaling (bias is
    /// below 2^-53 for the bounds used here).
    pub fn uniform_index(&mut self, bound: usize) -> usize {
        ((self.uniform() * bound as f64) as usize).min(bound - 1)
    }

    /// Standard normal via Box-Muller; draws two uniforms per pair.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// The built-in 4x4 covariance used by the default study design: unit
/// diagonal, (1,2)=0.10, (1,3)=0.48, (2,3)=0.76, (1,4)=(2,4)=(3,4)=0.48
/// (1-based variable numbering).
pub fn table1_covariance() -> SymmetricMatrix {
    let mut m = SymmetricMatrix::identity(4);
    m.set(0, 1, 0.10);
    m.set(0, 2, 0.48);
    m.set(1, 2, 0.76);
    m.set(0, 3, 0.48);
    m.set(1, 3, 0.48);
    m.set(2, 3, 0.48);
    m
}

/// Draw n i.i.d. rows from N(0, cov). Identical inputs produce bit-identical
/// output.
pub fn sample_mvn(cov: &SymmetricMatrix, n: usize, seed: SeedSpec) -> Result<ContinuousDataset> {
    let p = cov.dim();
    let chol = cov.cholesky()?;
    let mut stream = Stream::new(seed);
    let mut values = Vec::with_capacity(n * p);
    let mut z = vec![0.0f64; p];
    for _ in 0..n {
        for zj in z.iter_mut() {
            *zj = stream.standard_normal();
        }
        let x = chol.mul_vec(&z);
        values.extend_from_slice(&x);
    }
    ContinuousDataset::new(n, p, values)
}

/// Threshold at `tau`: strictly greater maps to 1, everything else to 0.
pub fn dichotomize(data: &ContinuousDataset, tau: f64) -> BinaryDataset {
    let (n, p) = (data.rows(), data.cols());
    let mut values = Vec::with_capacity(n * p);
    for i in 0..n {
        for j in 0..p {
            values.push(u8::from(data.get(i, j) > tau));
        }
    }
    BinaryDataset::new(n, p, values).expect("dichotomized data is well-formed by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_entries() {
        let m = table1_covariance();
        assert_eq!(m.get(1, 2), 0.76);
        assert_eq!(m.get(2, 1), 0.76);
        for i in 0..4 {
            assert_eq!(m.get(i, i), 1.00);
        }
        assert_eq!(m.get(0, 1), 0.10);
        assert_eq!(m.get(0, 2), 0.48);
        assert_eq!(m.get(3, 0), 0.48);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cov = table1_covariance();
        let seed = SeedSpec::new(42, 7);
        let a = sample_mvn(&cov, 50, seed).unwrap();
        let b = sample_mvn(&cov, 50, seed).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_replications_differ() {
        let cov = table1_covariance();
        let a = sample_mvn(&cov, 50, SeedSpec::new(42, 0)).unwrap();
        let b = sample_mvn(&cov, 50, SeedSpec::new(42, 1)).unwrap();
        assert_ne!(a, b);
    }

    fn sample_correlation(d: &ContinuousDataset, a: usize, b: usize) -> f64 {
        let n = d.rows() as f64;
        let (mut ma, mut mb) = (0.0, 0.0);
        for i in 0..d.rows() {
            ma += d.get(i, a);
            mb += d.get(i, b);
        }
        ma /= n;
        mb /= n;
        let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
        for i in 0..d.rows() {
            let xa = d.get(i, a) - ma;
            let xb = d.get(i, b) - mb;
            saa += xa * xa;
            sbb += xb * xb;
            sab += xa * xb;
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn large_sample_matches_target_correlations() {
        let cov = table1_covariance();
        let d = sample_mvn(&cov, 100_000, SeedSpec::new(9, 0)).unwrap();
        for i in 0..4 {
            for j in 0..i {
                let r = sample_correlation(&d, i, j);
                assert!(
                    (r - cov.get(i, j)).abs() < 0.02,
                    "corr({i},{j}) = {r}, want {}",
                    cov.get(i, j)
                );
            }
        }
    }

    #[test]
    fn independent_columns_uncorrelated() {
        let d = sample_mvn(&SymmetricMatrix::identity(2), 100_000, SeedSpec::new(3, 0)).unwrap();
        assert!(sample_correlation(&d, 0, 1).abs() < 0.02);
    }

    #[test]
    fn dichotomize_strictly_greater_rule() {
        let d = ContinuousDataset::new(2, 2, vec![0.5, -0.3, 0.0, 1.0]).unwrap();
        let b = dichotomize(&d, 0.0);
        assert_eq!(b.get(0, 0), 1);
        assert_eq!(b.get(0, 1), 0);
        assert_eq!(b.get(1, 0), 0, "value equal to tau maps to 0");
        assert_eq!(b.get(1, 1), 1);
    }

    #[test]
    fn dichotomize_monotone_in_tau() {
        let d = sample_mvn(&SymmetricMatrix::identity(2), 200, SeedSpec::new(5, 0)).unwrap();
        let lo = dichotomize(&d, -0.5);
        let hi = dichotomize(&d, 0.5);
        for i in 0..d.rows() {
            for j in 0..d.cols() {
                assert!(
                    hi.get(i, j) <= lo.get(i, j),
                    "raising tau flipped a 0 to a 1 at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn symmetric_threshold_gives_balanced_margins() {
        let cov = table1_covariance();
        let d = sample_mvn(&cov, 100_000, SeedSpec::new(11, 0)).unwrap();
        let b = dichotomize(&d, 0.0);
        for j in 0..4 {
            let p1 = b.column_mean(j);
            assert!((0.48..=0.52).contains(&p1), "column {j} proportion {p1}");
        }
    }
}
