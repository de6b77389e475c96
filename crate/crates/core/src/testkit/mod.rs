//! χ² numerics, SPD inversion, and the TMD/MGM goodness-of-fit tests.

pub mod chi2;
pub mod gof;
pub mod linalg;

pub use chi2::{chi2_cdf, chi2_quantile, chi2_sf};
pub use gof::{
    mgm_test, monte_carlo_sigma, monte_carlo_sigma_batch, tmd_test, Chi2Test, MonteCarloBatch,
    TestReport, DEFAULT_ALPHA,
};
pub use linalg::{invert_spd, SpdInverse};
