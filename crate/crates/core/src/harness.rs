//! Batch runner for rejection-rate studies over window sizes, elongations
//! and test variants.
//!
//! Replication `ν` of cell `(target_points, c_e)` is simulated with seed
//! `derive_seed(master_seed, [REPLICATION_TAG, target_points, c_e.to_bits(), ν])`
//! and the same pattern is handed to every test variant. The MGM null
//! covariance for a window is built from the isotropic model (`c_e = 1`) with
//! seed `derive_seed(master_seed, [MONTE_CARLO_TAG, target_points])`.
//! Aggregation happens after all replications are collected, in index order,
//! so results do not depend on the number of workers.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{bandwidth_from_c, sigma3_hat, y_vector, Bandwidth, KernelSpec};
use crate::geometry::{window_for_expected_points, Window};
use crate::model::{MarkBins, MarkedPointPattern, NullMarkDistribution};
use crate::seeding::derive_seed;
use crate::simulate::{simulate_pattern, BoundaryCoxConfig};
use crate::testkit::{monte_carlo_sigma, Chi2Test, TestReport};

pub const REPLICATION_TAG: u64 = 0x5245_504c; // "REPL"
pub const MONTE_CARLO_TAG: u64 = 0x4d43_5347; // "MCSG"

/// Share of inconclusive outcomes above which a run is flagged.
pub const INCONCLUSIVE_LIMIT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Base model; its elongation is replaced by each entry of `elongations`.
    pub model: BoundaryCoxConfig,
    pub target_points: Vec<usize>,
    pub elongations: Vec<f64>,
    /// Bandwidth constants for the TMD test; empty disables it.
    pub tmd_c: Vec<f64>,
    pub kernel: KernelSpec,
    /// Monte Carlo replications for the MGM null covariance; `None` disables it.
    pub mgm_n_mc: Option<usize>,
    pub bins: usize,
    pub replications: usize,
    pub alpha: f64,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            model: BoundaryCoxConfig::default(),
            target_points: vec![300, 600, 1200],
            elongations: vec![1.0, 1.135, 1.325],
            tmd_c: vec![0.5, 1.0, 2.0, 5.0],
            kernel: KernelSpec::uniform(),
            mgm_n_mc: Some(500),
            bins: 8,
            replications: 200,
            alpha: 0.05,
            master_seed: 20_130_601,
        }
    }
}

impl ScenarioConfig {
    /// 1000 replications per cell, targets 300, 600, …, 3000.
    pub fn full() -> Self {
        Self {
            target_points: (1..=10).map(|k| 300 * k).collect(),
            mgm_n_mc: Some(1000),
            replications: 1000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidConfig(
                "replications must be at least 1".into(),
            ));
        }
        if self.target_points.is_empty() || self.target_points.contains(&0) {
            return Err(Error::InvalidConfig(
                "target_points must be non-empty and positive".into(),
            ));
        }
        if self.elongations.is_empty()
            || self
                .elongations
                .iter()
                .any(|&c| !(c >= 1.0 && c.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "elongations must be non-empty and at least 1".into(),
            ));
        }
        if self.tmd_c.is_empty() && self.mgm_n_mc.is_none() {
            return Err(Error::InvalidConfig(
                "no test selected (tmd_c empty and mgm_n_mc unset)".into(),
            ));
        }
        if self.tmd_c.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidConfig(
                "bandwidth constants must be positive".into(),
            ));
        }
        if self.mgm_n_mc == Some(0) {
            return Err(Error::InvalidConfig("mgm_n_mc must be at least 1".into()));
        }
        if self.bins == 0 {
            return Err(Error::InvalidConfig("bins must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if !(self.kernel.support > 0.0 && self.kernel.support.is_finite()) {
            return Err(Error::InvalidConfig(
                "kernel support must be positive".into(),
            ));
        }
        Ok(())
    }

    fn variants(&self) -> Vec<TestVariant> {
        let mut v: Vec<TestVariant> = self.tmd_c.iter().map(|&c| TestVariant::Tmd { c }).collect();
        if let Some(n_mc) = self.mgm_n_mc {
            v.push(TestVariant::Mgm { n_mc });
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "test")]
pub enum TestVariant {
    Tmd { c: f64 },
    Mgm { n_mc: usize },
}

impl TestVariant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Tmd { .. } => "tmd",
            Self::Mgm { .. } => "mgm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateRow {
    pub variant: TestVariant,
    pub target_points: usize,
    pub elongation: f64,
    pub rejections: usize,
    pub inconclusive: usize,
    pub replications: usize,
}

impl ErrorRateRow {
    /// Rejections over all replications; inconclusive outcomes never count
    /// as rejections.
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.replications as f64
    }

    /// Binomial standard error `sqrt(r(1-r)/reps)`.
    pub fn std_error(&self) -> f64 {
        let r = self.rate();
        (r * (1.0 - r) / self.replications as f64).sqrt()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateTable {
    pub rows: Vec<ErrorRateRow>,
}

pub const TABLE_HEADER: &str = "test,c,n_mc,target_points,c_e,rate,reps,se,inconclusive";

/// `v` with six significant digits in positional notation.
pub fn fmt_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (5 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

impl ErrorRateTable {
    pub fn find(
        &self,
        variant: TestVariant,
        target_points: usize,
        elongation: f64,
    ) -> Option<&ErrorRateRow> {
        self.rows.iter().find(|r| {
            r.variant == variant && r.target_points == target_points && r.elongation == elongation
        })
    }

    pub fn total_outcomes(&self) -> usize {
        self.rows.iter().map(|r| r.replications).sum()
    }

    pub fn inconclusive_fraction(&self) -> f64 {
        let total = self.total_outcomes();
        if total == 0 {
            return 0.0;
        }
        self.rows.iter().map(|r| r.inconclusive).sum::<usize>() as f64 / total as f64
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(TABLE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let (c, n_mc) = match r.variant {
                TestVariant::Tmd { c } => (format!("{c}"), String::new()),
                TestVariant::Mgm { n_mc } => (String::new(), n_mc.to_string()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.variant.name(),
                c,
                n_mc,
                r.target_points,
                r.elongation,
                fmt_sig6(r.rate()),
                r.replications,
                fmt_sig6(r.std_error()),
                r.inconclusive
            );
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == TABLE_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header '{TABLE_HEADER}'"),
                })
            }
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 9 fields, got {}", f.len()),
                });
            }
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("'{s}': {e}")));
            let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("'{s}': {e}")));
            let variant = match f[0] {
                "tmd" => TestVariant::Tmd { c: num(f[1])? },
                "mgm" => TestVariant::Mgm { n_mc: int(f[2])? },
                other => return Err(err(format!("unknown test '{other}'"))),
            };
            let replications = int(f[6])?;
            let rate = num(f[5])?;
            rows.push(ErrorRateRow {
                variant,
                target_points: int(f[3])?,
                elongation: num(f[4])?,
                rejections: (rate * replications as f64).round() as usize,
                inconclusive: int(f[8])?,
                replications,
            });
        }
        Ok(Self { rows })
    }
}

/// Writes the table as CSV with the fixed column order of [`TABLE_HEADER`].
pub fn emit_table(table: &ErrorRateTable, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, table.to_csv_string())?;
    Ok(())
}

pub fn read_table(path: impl AsRef<Path>) -> Result<ErrorRateTable> {
    ErrorRateTable::parse_csv(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub target_points: usize,
    pub side: f64,
    pub expected_points: f64,
    /// Smoothing length `a` per TMD bandwidth constant, in `tmd_c` order.
    pub smoothing_lengths: Vec<f64>,
    pub bandwidths_admissible: bool,
    pub mgm_sigma0_singular: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub table: ErrorRateTable,
    pub windows: Vec<WindowRecord>,
}

fn run_tests(
    pattern: &MarkedPointPattern,
    bins: &MarkBins,
    null0: &NullMarkDistribution,
    cfg: &ScenarioConfig,
    bandwidths: &[Bandwidth],
    mgm: Option<&Chi2Test>,
) -> Result<Vec<Option<TestReport>>> {
    let y = y_vector(pattern, bins, null0)?;
    let mut out = Vec::with_capacity(bandwidths.len() + 1);
    for bw in bandwidths {
        if pattern.is_empty() {
            out.push(None);
            continue;
        }
        let sigma = sigma3_hat(pattern, bins, null0, &cfg.kernel, bw)?;
        out.push(Some(Chi2Test::new(&sigma, cfg.alpha)?.evaluate(&y)?));
    }
    if let Some(test) = mgm {
        out.push(Some(test.evaluate(&y)?));
    }
    Ok(out)
}

/// Runs every cell of the scenario on the current rayon pool.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    cfg.validate()?;
    let bins = MarkBins::new(cfg.bins)?;
    let null0 = NullMarkDistribution::uniform(&bins);
    let null_model = cfg.model.with_elongation(1.0);
    let variants = cfg.variants();

    // (variant, elongation, target) ordering for plot-ready output
    let mut keyed: Vec<((usize, usize, usize), ErrorRateRow)> = Vec::new();
    let mut windows = Vec::new();

    for (ti, &target) in cfg.target_points.iter().enumerate() {
        let window: Window = window_for_expected_points(&null_model, target, None)?;
        let bandwidths = cfg
            .tmd_c
            .iter()
            .map(|&c| bandwidth_from_c(c, &window, &cfg.kernel))
            .collect::<Result<Vec<_>>>()?;
        let mgm = match cfg.mgm_n_mc {
            Some(n_mc) => {
                let seed = derive_seed(cfg.master_seed, &[MONTE_CARLO_TAG, target as u64]);
                let sigma0 = monte_carlo_sigma(&null_model, &window, &bins, &null0, n_mc, seed)?;
                Some(Chi2Test::new(&sigma0, cfg.alpha)?)
            }
            None => None,
        };
        windows.push(WindowRecord {
            target_points: target,
            side: window.sides()[0],
            expected_points: null_model.expected_point_density() * window.area(),
            smoothing_lengths: bandwidths.iter().map(|b| b.smoothing_length).collect(),
            bandwidths_admissible: bandwidths.iter().all(Bandwidth::is_admissible),
            mgm_sigma0_singular: mgm.as_ref().map(Chi2Test::is_singular),
        });

        for (ei, &elongation) in cfg.elongations.iter().enumerate() {
            let model = cfg.model.with_elongation(elongation);
            let outcomes = (0..cfg.replications)
                .into_par_iter()
                .map(|nu| {
                    let seed = derive_seed(
                        cfg.master_seed,
                        &[
                            REPLICATION_TAG,
                            target as u64,
                            elongation.to_bits(),
                            nu as u64,
                        ],
                    );
                    let pattern = simulate_pattern(&model, &window, seed)?;
                    run_tests(&pattern, &bins, &null0, cfg, &bandwidths, mgm.as_ref())
                })
                .collect::<Result<Vec<_>>>()?;

            for (vi, variant) in variants.iter().enumerate() {
                let mut row = ErrorRateRow {
                    variant: *variant,
                    target_points: target,
                    elongation,
                    rejections: 0,
                    inconclusive: 0,
                    replications: cfg.replications,
                };
                for rep in &outcomes {
                    match &rep[vi] {
                        Some(r) if r.is_inconclusive() => row.inconclusive += 1,
                        Some(r) if r.reject => row.rejections += 1,
                        Some(_) => {}
                        None => row.inconclusive += 1,
                    }
                }
                keyed.push(((vi, ei, ti), row));
            }
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    Ok(ScenarioRun {
        table: ErrorRateTable {
            rows: keyed.into_iter().map(|(_, r)| r).collect(),
        },
        windows,
    })
}

/// [`run_scenario`] on a dedicated pool of `threads` workers.
pub fn run_scenario_with_threads(cfg: &ScenarioConfig, threads: usize) -> Result<ScenarioRun> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run_scenario(cfg))
}
