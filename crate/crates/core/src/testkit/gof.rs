//! χ² goodness-of-fit tests for the Palm mark distribution.
//!
//! Both tests evaluate `T = Yᵀ Σ̂⁻¹ Y` against χ²_ℓ. The TMD test estimates
//! `Σ` from the pattern itself with the smoothed estimator; the MGM test uses
//! a covariance matrix fixed in advance by Monte Carlo under a null model.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chi2::{chi2_quantile, chi2_sf};
use super::linalg::{invert_spd, SpdInverse};
use crate::error::{Error, Result};
use crate::estimate::{
    bandwidth_from_c, sigma2_hat, sigma3_hat, y_vector, CompensatedSum, CovarianceEstimate,
    EstimatorKind, KernelSpec,
};
use crate::geometry::Window;
use crate::model::{MarkBins, MarkedPointPattern, NullMarkDistribution};
use crate::seeding::derive_seed;
use crate::simulate::PatternModel;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// `NaN` when inconclusive.
    pub statistic: f64,
    pub df: usize,
    /// `NaN` when inconclusive.
    pub p_value: f64,
    pub alpha: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub covariance_kind: EstimatorKind,
    /// `NaN` when the covariance could not be inverted.
    pub condition_number: f64,
    /// Why no decision was reached, if none was.
    pub inconclusive: Option<String>,
}

impl TestReport {
    pub fn is_inconclusive(&self) -> bool {
        self.inconclusive.is_some()
    }

    /// `T=<..> df=<..> p=<..> reject=<0|1> cov=<kind>`, with a trailing
    /// `status=inconclusive` when no decision was reached.
    pub fn summary_line(&self) -> String {
        let mut line = format!(
            "T={} df={} p={} reject={} cov={}",
            self.statistic,
            self.df,
            self.p_value,
            u8::from(self.reject),
            self.covariance_kind
        );
        if self.is_inconclusive() {
            line.push_str(" status=inconclusive");
        }
        line
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "significance level {alpha} outside (0, 1)"
        )));
    }
    Ok(())
}

/// A χ² test against a fixed covariance matrix, inverted once and reused.
#[derive(Debug, Clone)]
pub struct Chi2Test {
    kind: EstimatorKind,
    df: usize,
    alpha: f64,
    critical_value: f64,
    inverse: std::result::Result<SpdInverse, String>,
}

impl Chi2Test {
    pub fn new(covariance: &CovarianceEstimate, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let df = covariance.ell();
        let inverse = match invert_spd(&covariance.matrix) {
            Ok(inv) => Ok(inv),
            Err(Error::SingularCovariance(msg)) => Err(msg),
            Err(e) => return Err(e),
        };
        Ok(Self {
            kind: covariance.kind,
            df,
            alpha,
            critical_value: chi2_quantile(1.0 - alpha, df)?,
            inverse,
        })
    }

    pub fn is_singular(&self) -> bool {
        self.inverse.is_err()
    }

    pub fn evaluate(&self, y: &DVector<f64>) -> Result<TestReport> {
        if y.len() != self.df {
            return Err(Error::InvalidArgument(format!(
                "Y has {} components, covariance is {}×{}",
                y.len(),
                self.df,
                self.df
            )));
        }
        let mut report = TestReport {
            statistic: f64::NAN,
            df: self.df,
            p_value: f64::NAN,
            alpha: self.alpha,
            critical_value: self.critical_value,
            reject: false,
            covariance_kind: self.kind,
            condition_number: f64::NAN,
            inconclusive: None,
        };
        let inv = match &self.inverse {
            Ok(inv) => inv,
            Err(msg) => {
                report.inconclusive = Some(format!("singular covariance: {msg}"));
                return Ok(report);
            }
        };
        report.condition_number = inv.condition;
        let statistic = y.dot(&(&inv.inverse * y));
        if !(statistic >= 0.0) {
            report.inconclusive = Some(format!("negative quadratic form {statistic}"));
            return Ok(report);
        }
        report.statistic = statistic;
        report.p_value = chi2_sf(statistic, self.df);
        report.reject = statistic > self.critical_value;
        Ok(report)
    }
}

/// Test for the typical mark distribution: `Σ̂` is the smoothed estimator
/// with bandwidth `b = c |W|^{-3/8}`.
pub fn tmd_test(
    pattern: &MarkedPointPattern,
    bins: &MarkBins,
    null0: &NullMarkDistribution,
    kernel: &KernelSpec,
    c: f64,
    alpha: f64,
) -> Result<TestReport> {
    if pattern.is_empty() {
        return Err(Error::UndefinedEstimate(
            "TMD test on an empty pattern".into(),
        ));
    }
    check_alpha(alpha)?;
    let bandwidth = bandwidth_from_c(c, pattern.window(), kernel)?;
    let sigma = sigma3_hat(pattern, bins, null0, kernel, &bandwidth)?;
    let y = y_vector(pattern, bins, null0)?;
    Chi2Test::new(&sigma, alpha)?.evaluate(&y)
}

/// Test for mark-oriented goodness of model fit against a fixed `Σ₀`.
pub fn mgm_test(
    pattern: &MarkedPointPattern,
    bins: &MarkBins,
    null0: &NullMarkDistribution,
    sigma0: &CovarianceEstimate,
    alpha: f64,
) -> Result<TestReport> {
    if sigma0.ell() != bins.ell() {
        return Err(Error::InvalidArgument(format!(
            "Σ₀ is {}×{} but there are {} bins",
            sigma0.ell(),
            sigma0.ell(),
            bins.ell()
        )));
    }
    let y = y_vector(pattern, bins, null0)?;
    let mut report = Chi2Test::new(sigma0, alpha)?.evaluate(&y)?;
    report.covariance_kind = EstimatorKind::MonteCarlo;
    Ok(report)
}

/// Mean of the naive estimator over a contiguous block of replications.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloBatch {
    pub mean: DMatrix<f64>,
    /// Entrywise standard error of the mean (`NaN` for fewer than two
    /// replications).
    pub std_error: DMatrix<f64>,
    pub replications: usize,
}

/// Replications `first..first + count`, replication `ν` seeded with
/// `derive_seed(seed, [ν])`.
pub fn monte_carlo_sigma_batch<M: PatternModel + ?Sized>(
    model: &M,
    window: &Window,
    bins: &MarkBins,
    null0: &NullMarkDistribution,
    first: usize,
    count: usize,
    seed: u64,
) -> Result<MonteCarloBatch> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "Monte Carlo needs at least one replication".into(),
        ));
    }
    let ell = bins.ell();
    let samples = (first..first + count)
        .into_par_iter()
        .map(|nu| {
            let pattern = model.simulate(window, derive_seed(seed, &[nu as u64]))?;
            sigma2_hat(&pattern, bins, null0).map(|s| s.matrix)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = count as f64;
    let mut mean = DMatrix::zeros(ell, ell);
    let mut std_error = DMatrix::from_element(ell, ell, f64::NAN);
    for i in 0..ell {
        for j in 0..ell {
            let mut acc = CompensatedSum::default();
            samples.iter().for_each(|m| acc.add(m[(i, j)]));
            let mu = acc.value() / n;
            mean[(i, j)] = mu;
            if count > 1 {
                let mut sq = CompensatedSum::default();
                samples
                    .iter()
                    .for_each(|m| sq.add((m[(i, j)] - mu).powi(2)));
                std_error[(i, j)] = (sq.value() / (n - 1.0) / n).sqrt();
            }
        }
    }
    Ok(MonteCarloBatch {
        mean,
        std_error,
        replications: count,
    })
}

/// Monte Carlo estimate of `Σ₀`: the naive estimator averaged over `n`
/// independent realizations of `model` in `window`.
pub fn monte_carlo_sigma<M: PatternModel + ?Sized>(
    model: &M,
    window: &Window,
    bins: &MarkBins,
    null0: &NullMarkDistribution,
    n: usize,
    seed: u64,
) -> Result<CovarianceEstimate> {
    let batch = monte_carlo_sigma_batch(model, window, bins, null0, 0, n, seed)?;
    Ok(CovarianceEstimate {
        matrix: batch.mean,
        kind: EstimatorKind::MonteCarlo,
        kernel: None,
        bandwidth: None,
        replications: Some(n),
    })
}
