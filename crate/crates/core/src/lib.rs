//! Bivariate copula regression: joint models for two continuous outcomes in
//! which every distribution parameter — margin location/scale/shape and the
//! copula dependence parameter — is driven by its own additive predictor.

pub mod copula;
pub mod data;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod simulate;
pub mod likelihood;
pub mod margins;
pub mod model;
pub mod quadrature;
pub mod rootfind;
pub mod smooth;
pub mod special;
pub mod stats;

pub use error::{Error, Result};

/// Guard added by parameter links so transformed parameters stay strictly
/// inside open ranges.
pub const LINK_EPS: f64 = f64::EPSILON * 1e6;

/// Clamp width keeping copula arguments strictly inside (0, 1).
pub const UV_EPS: f64 = 1e-12;
