//! One-factor latent variable models for binary data, three ways: delta- and
//! theta-parameterized ordinal factor models fitted to tetrachoric
//! correlations by weighted least squares, and a 2PL item response model
//! fitted by marginal maximum likelihood. The point of running all three on
//! the same data is diagnostic: a single underlying anomaly shows up as a
//! negative residual variance in the delta fit, as nonconvergence in the
//! theta fit, and as an extreme discrimination in the IRT fit. The `study`
//! module replays that comparison over many simulated replications.

pub mod data;
pub mod error;
pub mod irt;
pub mod numeric;
pub mod ordfa;
pub mod simgen;
pub mod study;
pub mod tetra;

pub use error::{Error, Result};
