//! Property tests for the structural invariants that hold for every input:
//! Cholesky round-trips, the loading conversions inverting each other, and
//! the binary CSV format surviving a round trip.

use heywood_core::data::BinaryDataset;
use heywood_core::numeric::SymmetricMatrix;
use heywood_core::ordfa::{delta_to_theta, theta_to_delta};
use proptest::prelude::*;

/// random positive-definite matrix built from a random lower factor with
/// positive diagonal
fn arb_spd(dim: usize) -> impl Strategy<Value = SymmetricMatrix> {
    prop::collection::vec(-2.0f64..2.0, dim * (dim + 1) / 2).prop_map(move |vals| {
        let mut l = vec![vec![0.0f64; dim]; dim];
        let mut idx = 0;
        for i in 0..dim {
            for j in 0..=i {
                l[i][j] = if i == j {
                    0.2 + vals[idx].abs()
                } else {
                    vals[idx]
                };
                idx += 1;
            }
        }
        let mut s = SymmetricMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                let mut sum = 0.0;
                for k in 0..=j {
                    sum += l[i][k] * l[j][k];
                }
                s.set(i, j, sum);
            }
        }
        s
    })
}

proptest! {
    #[test]
    fn cholesky_roundtrip(s in arb_spd(5)) {
        let chol = s.cholesky().expect("construction guarantees positive definiteness");
        let back = chol.reconstruct();
        let scale = s.max_abs();
        for i in 0..5 {
            for j in 0..5 {
                prop_assert!(
                    (back.get(i, j) - s.get(i, j)).abs() <= 1e-10 * scale,
                    "entry ({}, {}): {} vs {}", i, j, back.get(i, j), s.get(i, j)
                );
            }
        }
    }

    #[test]
    fn loading_conversions_invert(lambda in -0.9999f64..0.9999) {
        let theta = delta_to_theta(lambda).expect("|lambda| < 1");
        let back = theta_to_delta(theta);
        prop_assert!((back - lambda).abs() < 1e-9, "{} -> {} -> {}", lambda, theta, back);
    }

    #[test]
    fn binary_csv_roundtrip(rows in 1usize..30, cols in 1usize..8, seed in any::<u64>()) {
        let mut v = seed;
        let values: Vec<u8> = (0..rows * cols)
            .map(|_| {
                v = v.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((v >> 33) & 1) as u8
            })
            .collect();
        let data = BinaryDataset::new(rows, cols, values).unwrap();
        let parsed = BinaryDataset::from_csv(&data.to_csv()).unwrap();
        prop_assert_eq!(parsed, data);
    }
}
