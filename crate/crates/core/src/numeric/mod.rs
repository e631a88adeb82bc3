//! Deterministic numerical primitives: normal distribution functions,
//! Cholesky factorization, and Gauss-Hermite quadrature.

mod matrix;
mod normal;
mod quadrature;

pub use matrix::{LowerTriangular, SymmetricMatrix};
pub use normal::{
    bivariate_normal_cdf, bivariate_normal_pdf, erfc, std_normal_cdf, std_normal_pdf,
    std_normal_quantile,
};
pub use quadrature::{gauss_hermite, QuadratureRule, MAX_NODES};
