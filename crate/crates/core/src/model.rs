//! Marked point patterns with directional marks on the upper half-circle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Window};

/// Direction on the upper half-circle, stored as an angle in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DirectionMark(f64);

impl DirectionMark {
    pub fn new(theta: f64) -> Result<Self> {
        if (0.0..PI).contains(&theta) {
            Ok(Self(theta))
        } else {
            Err(Error::InvalidArgument(format!(
                "direction angle {theta} outside [0, π)"
            )))
        }
    }

    pub fn theta(self) -> f64 {
        self.0
    }
}

/// Folds a unit vector onto the upper half-circle, identifying `v` with `-v`.
pub fn fold_direction(v: [f64; 2]) -> Result<DirectionMark> {
    let norm = v[0].hypot(v[1]);
    if !((norm - 1.0).abs() <= 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "expected a unit vector, got ({}, {}) with norm {norm}",
            v[0], v[1]
        )));
    }
    let mut theta = v[1].atan2(v[0]);
    if theta < 0.0 {
        theta += PI;
    }
    if theta >= PI {
        theta = 0.0;
    }
    Ok(DirectionMark(theta))
}

/// The ℓ half-open bins `[(i-1)π/(ℓ+1), iπ/(ℓ+1))`, `i = 1..ℓ`.
///
/// The last slice `[ℓπ/(ℓ+1), π)` belongs to no bin, so the bin indicators
/// never sum to one and the ℓ×ℓ covariance stays non-degenerate. Bin indices
/// in this API are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkBins {
    ell: usize,
}

impl MarkBins {
    pub fn new(ell: usize) -> Result<Self> {
        if ell == 0 {
            return Err(Error::InvalidArgument(
                "number of bins must be at least 1".into(),
            ));
        }
        Ok(Self { ell })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn width(&self) -> f64 {
        PI / (self.ell + 1) as f64
    }

    fn edge(&self, i: usize) -> f64 {
        i as f64 * PI / (self.ell + 1) as f64
    }

    /// `[lo, hi)` of bin `i` (zero-based).
    pub fn interval(&self, i: usize) -> (f64, f64) {
        assert!(i < self.ell, "bin {i} out of range for ℓ = {}", self.ell);
        (self.edge(i), self.edge(i + 1))
    }

    /// Zero-based bin containing `mark`, or `None` for the excluded slice.
    pub fn bin_index(&self, mark: DirectionMark) -> Option<usize> {
        let theta = mark.theta();
        let mut i = ((theta / self.width()).floor() as usize).min(self.ell);
        // settle against the same edges `interval` reports
        while i > 0 && theta < self.edge(i) {
            i -= 1;
        }
        while i < self.ell && theta >= self.edge(i + 1) {
            i += 1;
        }
        (i < self.ell).then_some(i)
    }
}

/// Hypothesised bin probabilities `p_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullMarkDistribution {
    probabilities: Vec<f64>,
}

impl NullMarkDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidArgument(
                "null distribution needs at least one bin".into(),
            ));
        }
        if let Some(p) = probabilities.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "bin probability {p} outside [0, 1]"
            )));
        }
        let total: f64 = probabilities.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "bin probabilities sum to {total} > 1"
            )));
        }
        Ok(Self { probabilities })
    }

    /// Uniform direction law on `[0, π)`: every bin gets `1/(ℓ+1)`.
    pub fn uniform(bins: &MarkBins) -> Self {
        Self {
            probabilities: vec![1.0 / (bins.ell() + 1) as f64; bins.ell()],
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub(crate) fn check_bins(&self, bins: &MarkBins) -> Result<()> {
        if self.len() != bins.ell() {
            return Err(Error::InvalidArgument(format!(
                "null distribution has {} bins, binning has {}",
                self.len(),
                bins.ell()
            )));
        }
        Ok(())
    }
}

/// Points with direction marks, observed in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedPointPattern {
    points: Vec<Point>,
    marks: Vec<DirectionMark>,
    window: Window,
}

impl MarkedPointPattern {
    /// Points outside `window` are dropped. Coincident locations are an error.
    pub fn new(points: Vec<Point>, marks: Vec<DirectionMark>, window: Window) -> Result<Self> {
        if points.len() != marks.len() {
            return Err(Error::InvalidArgument(format!(
                "{} points but {} marks",
                points.len(),
                marks.len()
            )));
        }
        let (points, marks): (Vec<_>, Vec<_>) = points
            .into_iter()
            .zip(marks)
            .filter(|(p, _)| window.contains(*p))
            .unzip();
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_unstable_by(|&i, &j| cmp_points(&points[i], &points[j]));
        if let Some(w) = order.windows(2).find(|w| points[w[0]] == points[w[1]]) {
            let [x, y] = points[w[0]];
            return Err(Error::DuplicatePoint { x, y });
        }
        Ok(Self {
            points,
            marks,
            window,
        })
    }

    pub fn empty(window: Window) -> Self {
        Self {
            points: Vec::new(),
            marks: Vec::new(),
            window,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn marks(&self) -> &[DirectionMark] {
        &self.marks
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, DirectionMark)> + '_ {
        self.points.iter().copied().zip(self.marks.iter().copied())
    }
}

pub(crate) fn cmp_points(a: &Point, b: &Point) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}
