//! Empirical intensity, empirical Palm mark distribution, the normalized
//! deviation vector `Y`, and the three pair-sum covariance estimators.
//!
//! All three estimators share the single-point term
//!
//! ```text
//! (1/|W|) Σ_p (1{M_p ∈ C_i ∩ C_j} - p_i p_j)
//! ```
//!
//! and differ in how ordered pairs `p ≠ q` are weighted in the second term
//! `Σ_{p≠q} (1{M_p ∈ C_i} - p_i)(1{M_q ∈ C_j} - p_j) · weight(p, q)`:
//!
//! | estimator       | weight                                  |
//! |-----------------|-----------------------------------------|
//! | edge-corrected  | `1 / γ_W(X_q - X_p)`                    |
//! | naive           | `1 / |W|`                               |
//! | smoothed        | `w(‖X_q - X_p‖ / a) / γ_W(X_q - X_p)`   |
//!
//! The centred indicator vector of a point depends only on its bin, so the
//! pair sum collapses to a `(ℓ+1)×(ℓ+1)` table of summed weights per bin pair
//! (the extra row is the excluded slice). Pairs are visited in a canonical
//! point order with compensated accumulation, making every estimate
//! independent of the input order.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Window};
use crate::model::{cmp_points, MarkBins, MarkedPointPattern, NullMarkDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    /// `1{|x| ≤ r_w}`
    Uniform,
    /// `max(0, 1 - |x|/r_w)`
    Triangular,
}

/// Symmetric, non-negative kernel bounded by 1 with `w(0) = 1` and support
/// `[-r_w, r_w]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub support: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::uniform()
    }
}

impl KernelSpec {
    pub fn uniform() -> Self {
        Self {
            shape: KernelShape::Uniform,
            support: 1.0,
        }
    }

    pub fn triangular() -> Self {
        Self {
            shape: KernelShape::Triangular,
            support: 1.0,
        }
    }

    /// Upper bound `m_w`.
    pub fn bound(&self) -> f64 {
        1.0
    }

    pub fn weight(&self, x: f64) -> f64 {
        let u = x.abs();
        if u > self.support {
            return 0.0;
        }
        match self.shape {
            KernelShape::Uniform => 1.0,
            KernelShape::Triangular => 1.0 - u / self.support,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.support > 0.0 && self.support.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel support {} must be positive",
                self.support
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum BandwidthStatus {
    Admissible,
    /// `b > ρ(W) / (2 d r_w |W|^{1/d})`; the estimate is still computed.
    ExceedsUpperBound,
}

/// Dimensionless bandwidth `b` and the smoothing length `a = b |W|^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub b: f64,
    pub smoothing_length: f64,
    /// `ρ(W) / (2 d r_w |W|^{1/d})` for the window the bandwidth was built on.
    pub upper_bound: f64,
    pub status: BandwidthStatus,
    /// `b^d |W|`; must diverge along a sequence of growing windows.
    pub growth_term: f64,
    /// `b^{3d/2} |W|`; must vanish along a sequence of growing windows.
    pub decay_term: f64,
}

const DIM: f64 = 2.0;

impl Bandwidth {
    pub fn new(b: f64, window: &Window, kernel: &KernelSpec) -> Result<Self> {
        kernel.validate()?;
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth {b} must be positive"
            )));
        }
        let area = window.area();
        let root = area.powf(1.0 / DIM);
        let upper_bound = window.inradius() / (2.0 * DIM * kernel.support * root);
        let status = if b <= upper_bound {
            BandwidthStatus::Admissible
        } else {
            BandwidthStatus::ExceedsUpperBound
        };
        Ok(Self {
            b,
            smoothing_length: b * root,
            upper_bound,
            status,
            growth_term: b.powf(DIM) * area,
            decay_term: b.powf(1.5 * DIM) * area,
        })
    }

    pub fn is_admissible(&self) -> bool {
        self.status == BandwidthStatus::Admissible
    }
}

/// `b = c |W|^{-3/(4d)}` with `d = 2`, so the smoothing length is `c |W|^{1/8}`.
pub fn bandwidth_from_c(c: f64, window: &Window, kernel: &KernelSpec) -> Result<Bandwidth> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth constant {c} must be positive"
        )));
    }
    let b = c * window.area().powf(-3.0 / (4.0 * DIM));
    Bandwidth::new(b, window, kernel)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    EdgeCorrected,
    Naive,
    Smoothed,
    MonteCarlo,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::EdgeCorrected => "edge_corrected",
            Self::Naive => "naive",
            Self::Smoothed => "smoothed",
            Self::MonteCarlo => "monte_carlo",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "edge_corrected" => Ok(Self::EdgeCorrected),
            "2" | "naive" => Ok(Self::Naive),
            "3" | "smoothed" => Ok(Self::Smoothed),
            "monte_carlo" => Ok(Self::MonteCarlo),
            other => Err(Error::InvalidArgument(format!(
                "unknown estimator '{other}'"
            ))),
        }
    }
}

/// Symmetric ℓ×ℓ covariance matrix with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub kind: EstimatorKind,
    pub kernel: Option<KernelSpec>,
    pub bandwidth: Option<Bandwidth>,
    pub replications: Option<usize>,
}

impl CovarianceEstimate {
    pub fn new(matrix: DMatrix<f64>, kind: EstimatorKind) -> Self {
        Self {
            matrix,
            kind,
            kernel: None,
            bandwidth: None,
            replications: None,
        }
    }

    pub fn ell(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest `|m_ij - m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let m = &self.matrix;
        let mut worst = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..i {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// `N / |W|`.
pub fn intensity_hat(pattern: &MarkedPointPattern) -> f64 {
    pattern.len() as f64 / pattern.window().area()
}

fn bin_counts(pattern: &MarkedPointPattern, bins: &MarkBins) -> Vec<usize> {
    let mut counts = vec![0usize; bins.ell() + 1];
    for &m in pattern.marks() {
        counts[bins.bin_index(m).unwrap_or(bins.ell())] += 1;
    }
    counts
}

/// Fraction of points whose mark falls in each bin.
pub fn palm_hat(pattern: &MarkedPointPattern, bins: &MarkBins) -> Result<Vec<f64>> {
    if pattern.is_empty() {
        return Err(Error::UndefinedEstimate(
            "empirical Palm mark distribution of an empty pattern".into(),
        ));
    }
    let n = pattern.len() as f64;
    let counts = bin_counts(pattern, bins);
    Ok(counts[..bins.ell()].iter().map(|&c| c as f64 / n).collect())
}

/// `Y_i = (N_i - N p_i) / sqrt(|W|)`.
pub fn y_vector(
    pattern: &MarkedPointPattern,
    bins: &MarkBins,
    null0: &NullMarkDistribution,
) -> Result<DVector<f64>> {
    null0.check_bins(bins)?;
    let counts = bin_counts(pattern, bins);
    let n = pattern.len() as f64;
    let root = pattern.window().area().sqrt();
    Ok(DVector::from_iterator(
        bins.ell(),
        null0
            .probabilities()
            .iter()
            .zip(&counts)
            .map(|(&p, &c)| (c as f64 - n * p) / root),
    ))
}

/// Points in canonical order with their bin (ℓ for the excluded slice).
struct Binned {
    points: Vec<Point>,
    bins: Vec<usize>,
    counts: Vec<usize>,
    ell: usize,
}

impl Binned {
    fn new(pattern: &MarkedPointPattern, bins: &MarkBins) -> Self {
        let ell = bins.ell();
        let mut order: Vec<usize> = (0..pattern.len()).collect();
        let pts = pattern.points();
        let marks = pattern.marks();
        order.sort_unstable_by(|&i, &j| {
            cmp_points(&pts[i], &pts[j]).then(marks[i].theta().total_cmp(&marks[j].theta()))
        });
        let mut counts = vec![0usize; ell + 1];
        let mut out_bins = Vec::with_capacity(order.len());
        for &i in &order {
            let b = bins.bin_index(marks[i]).unwrap_or(ell);
            counts[b] += 1;
            out_bins.push(b);
        }
        Self {
            points: order.iter().map(|&i| pts[i]).collect(),
            bins: out_bins,
            counts,
            ell,
        }
    }

    fn total(&self) -> usize {
        self.points.len()
    }
}

fn single_point_term(binned: &Binned, probs: &[f64], area: f64) -> DMatrix<f64> {
    let ell = binned.ell;
    let n = binned.total() as f64;
    DMatrix::from_fn(ell, ell, |i, j| {
        let diag = if i == j { binned.counts[i] as f64 } else { 0.0 };
        (diag - n * probs[i] * probs[j]) / area
    })
}

/// `Σ_{b,b'} S[b][b'] a(b)_i a(b')_j` with `a(b)_i = 1{b = i} - p_i`,
/// evaluated on the upper triangle and mirrored.
fn contract_pair_table(table: &[f64], ell: usize, probs: &[f64]) -> DMatrix<f64> {
    let centred = |b: usize, i: usize| if b == i { 1.0 - probs[i] } else { -probs[i] };
    let stride = ell + 1;
    let mut out = DMatrix::zeros(ell, ell);
    for i in 0..ell {
        for j in i..ell {
            let mut acc = CompensatedSum::default();
            for b in 0..stride {
                let ai = centred(b, i);
                for c in 0..stride {
                    acc.add(table[b * stride + c] * ai * centred(c, j));
                }
            }
            out[(i, j)] = acc.value();
            out[(j, i)] = acc.value();
        }
    }
    out
}

/// Per-bin-pair sums over ordered pairs `p ≠ q` of `weight(‖Δ‖) / γ_W(Δ)`.
///
/// With `support`, only pairs within that distance are visited (cell grid);
/// `weight` must vanish beyond it.
fn edge_corrected_pair_table(
    binned: &Binned,
    window: &Window,
    weight: impl Fn(f64) -> f64,
    support: Option<f64>,
) -> Result<Vec<f64>> {
    let stride = binned.ell + 1;
    let mut acc = vec![CompensatedSum::default(); stride * stride];
    let n = binned.total();
    let mut visit = |p: usize, q: usize| -> Result<()> {
        let a = binned.points[p];
        let b = binned.points[q];
        let delta = [b[0] - a[0], b[1] - a[1]];
        let w = weight(delta[0].hypot(delta[1]));
        if w == 0.0 {
            return Ok(());
        }
        let overlap = window.set_covariance(delta);
        if !(overlap > 0.0) {
            return Err(Error::UndefinedEstimate(format!(
                "points {a:?} and {b:?} have disjoint window translates"
            )));
        }
        let v = w / overlap;
        let (bp, bq) = (binned.bins[p], binned.bins[q]);
        acc[bp * stride + bq].add(v);
        acc[bq * stride + bp].add(v);
        Ok(())
    };

    match support.filter(|&h| h < window.diameter()) {
        None => {
            for p in 0..n {
                for q in p + 1..n {
                    visit(p, q)?;
                }
            }
        }
        Some(h) => {
            let grid = CellGrid::new(&binned.points, window, h);
            let mut neighbours = Vec::new();
            for p in 0..n {
                grid.neighbours_after(p, &binned.points[p], &mut neighbours);
                neighbours.sort_unstable();
                for &q in &neighbours {
                    visit(p, q)?;
                }
            }
        }
    }
    Ok(acc.iter().map(CompensatedSum::value).collect())
}

/// Square cells of side at least `h` over the window.
struct CellGrid {
    origin: Point,
    cell: f64,
    dims: [usize; 2],
    cells: Vec<Vec<usize>>,
}

impl CellGrid {
    const MAX_DIM: usize = 2048;

    fn new(points: &[Point], window: &Window, h: f64) -> Self {
        let [l1, l2] = window.sides();
        let cell = h.max(l1.max(l2) / Self::MAX_DIM as f64);
        let dims = [
            ((l1 / cell).ceil() as usize).max(1),
            ((l2 / cell).ceil() as usize).max(1),
        ];
        let mut grid = Self {
            origin: window.origin(),
            cell,
            dims,
            cells: vec![Vec::new(); dims[0] * dims[1]],
        };
        for (i, p) in points.iter().enumerate() {
            let (cx, cy) = grid.locate(p);
            grid.cells[cy * dims[0] + cx].push(i);
        }
        grid
    }

    fn locate(&self, p: &Point) -> (usize, usize) {
        let f =
            |v: f64, o: f64, d: usize| (((v - o) / self.cell).floor().max(0.0) as usize).min(d - 1);
        (
            f(p[0], self.origin[0], self.dims[0]),
            f(p[1], self.origin[1], self.dims[1]),
        )
    }

    /// Indices `q > p` in the 3×3 block of cells around `point`.
    fn neighbours_after(&self, p: usize, point: &Point, out: &mut Vec<usize>) {
        out.clear();
        let (cx, cy) = self.locate(point);
        for y in cy.saturating_sub(1)..=(cy + 1).min(self.dims[1] - 1) {
            for x in cx.saturating_sub(1)..=(cx + 1).min(self.dims[0] - 1) {
                out.extend(
                    self.cells[y * self.dims[0] + x]
                        .iter()
                        .copied()
                        .filter(|&q| q > p),
                );
            }
        }
    }
}

fn prepare<'a>(
    pattern: &MarkedPointPattern,
    bins: &MarkBins,
    null0: &'a NullMarkDistribution,
) -> Result<(Binned, &'a [f64], f64)> {
    null0.check_bins(bins)?;
    Ok((
        Binned::new(pattern, bins),
        null0.probabilities(),
        pattern.window().area(),
    ))
}

/// Edge-corrected estimator: pairs weighted by `1 / γ_W(X_q - X_p)`.
/// Unbiased for every stationary marked point process.
pub fn sigma1_hat(
    pattern: &MarkedPointPattern,
    bins: &MarkBins,
    null0: &NullMarkDistribution,
) -> Result<CovarianceEstimate> {
    let (binned, probs, area) = prepare(pattern, bins, null0)?;
    let table = edge_corrected_pair_table(&binned, pattern.window(), |_| 1.0, None)?;
    let matrix =
        single_point_term(&binned, probs, area) + contract_pair_table(&table, binned.ell, probs);
    Ok(CovarianceEstimate::new(
        matrix,
        EstimatorKind::EdgeCorrected,
    ))
}

/// Naive estimator: pairs weighted by `1 / |W|`.
///
/// The pair table is `n_b n_c - δ_bc n_b` counts, so this runs in O(N).
pub fn sigma2_hat(
    pattern: &MarkedPointPattern,
    bins: &MarkBins,
    null0: &NullMarkDistribution,
) -> Result<CovarianceEstimate> {
    let (binned, probs, area) = prepare(pattern, bins, null0)?;
    let stride = binned.ell + 1;
    let mut table = vec![0.0; stride * stride];
    for b in 0..stride {
        for c in 0..stride {
            let nb = binned.counts[b] as f64;
            let ordered = nb * binned.counts[c] as f64 - if b == c { nb } else { 0.0 };
            table[b * stride + c] = ordered / area;
        }
    }
    let matrix =
        single_point_term(&binned, probs, area) + contract_pair_table(&table, binned.ell, probs);
    Ok(CovarianceEstimate::new(matrix, EstimatorKind::Naive))
}

/// Kernel-smoothed edge-corrected estimator: each pair additionally weighted
/// by `w(‖X_q - X_p‖ / a)`, `a` the smoothing length of `bandwidth`.
pub fn sigma3_hat(
    pattern: &MarkedPointPattern,
    bins: &MarkBins,
    null0: &NullMarkDistribution,
    kernel: &KernelSpec,
    bandwidth: &Bandwidth,
) -> Result<CovarianceEstimate> {
    kernel.validate()?;
    let (binned, probs, area) = prepare(pattern, bins, null0)?;
    let a = bandwidth.smoothing_length;
    let table = edge_corrected_pair_table(
        &binned,
        pattern.window(),
        |d| kernel.weight(d / a),
        Some(a * kernel.support),
    )?;
    let matrix =
        single_point_term(&binned, probs, area) + contract_pair_table(&table, binned.ell, probs);
    Ok(CovarianceEstimate {
        matrix,
        kind: EstimatorKind::Smoothed,
        kernel: Some(*kernel),
        bandwidth: Some(*bandwidth),
        replications: None,
    })
}

/// Dispatches on `kind`; the smoothed estimator requires a bandwidth.
pub fn estimate_covariance(
    kind: EstimatorKind,
    pattern: &MarkedPointPattern,
    bins: &MarkBins,
    null0: &NullMarkDistribution,
    smoothing: Option<(&KernelSpec, &Bandwidth)>,
) -> Result<CovarianceEstimate> {
    match kind {
        EstimatorKind::EdgeCorrected => sigma1_hat(pattern, bins, null0),
        EstimatorKind::Naive => sigma2_hat(pattern, bins, null0),
        EstimatorKind::Smoothed => {
            let (kernel, bw) = smoothing.ok_or_else(|| {
                Error::InvalidArgument("smoothed estimator needs a kernel and bandwidth".into())
            })?;
            sigma3_hat(pattern, bins, null0, kernel, bw)
        }
        EstimatorKind::MonteCarlo => Err(Error::InvalidArgument(
            "Monte Carlo covariance is not a single-pattern estimator".into(),
        )),
    }
}
