//! Deliberately naive reference implementations. Nothing here calls into the
//! estimator, binning or χ² code of the library.

#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

use std::f64::consts::PI;

use markgof::{EstimatorKind, KernelShape, MarkedPointPattern};
use nalgebra::DMatrix;

/// Main-path value next to its reference value.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub quantity: String,
    pub main: f64,
    pub oracle: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    /// Relative deviation against `scale`, which should be at least `|oracle|`.
    pub fn relative(
        quantity: impl Into<String>,
        main: f64,
        oracle: f64,
        scale: f64,
        tolerance: f64,
    ) -> Self {
        let abs_dev = (main - oracle).abs();
        let denom = scale.max(oracle.abs());
        let rel_dev = if denom > 0.0 {
            abs_dev / denom
        } else {
            abs_dev
        };
        Self {
            quantity: quantity.into(),
            main,
            oracle,
            abs_dev,
            rel_dev,
            tolerance,
            pass: rel_dev <= tolerance,
        }
    }

    pub fn absolute(quantity: impl Into<String>, main: f64, oracle: f64, tolerance: f64) -> Self {
        let abs_dev = (main - oracle).abs();
        Self {
            quantity: quantity.into(),
            main,
            oracle,
            abs_dev,
            rel_dev: if oracle != 0.0 {
                abs_dev / oracle.abs()
            } else {
                abs_dev
            },
            tolerance,
            pass: abs_dev <= tolerance,
        }
    }
}

/// `λ (p_i δ_ij - p_i p_j)`.
pub fn closed_form_sigma_independent(lambda: f64, probs: &[f64]) -> DMatrix<f64> {
    let n = probs.len();
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { probs[i] } else { 0.0 };
        lambda * (diag - probs[i] * probs[j])
    })
}

/// Bin of `theta` among `ell + 1` equal slices of `[0, π)`; `None` for the
/// last slice.
pub fn naive_bin(theta: f64, ell: usize) -> Option<usize> {
    let k = (theta / (PI / (ell + 1) as f64)).floor() as usize;
    (k < ell).then_some(k)
}

fn indicator(b: Option<usize>, i: usize) -> f64 {
    if b == Some(i) {
        1.0
    } else {
        0.0
    }
}

fn set_covariance(sides: [f64; 2], d: [f64; 2]) -> f64 {
    (sides[0] - d[0].abs()).max(0.0) * (sides[1] - d[1].abs()).max(0.0)
}

/// Smoothing for the smoothed estimator: kernel shape, kernel support and
/// smoothing length `a`.
#[derive(Debug, Clone, Copy)]
pub struct OracleSmoothing {
    pub shape: KernelShape,
    pub support: f64,
    pub smoothing_length: f64,
}

fn kernel(shape: KernelShape, support: f64, x: f64) -> f64 {
    let x = x.abs();
    match shape {
        KernelShape::Uniform => {
            if x <= support {
                1.0
            } else {
                0.0
            }
        }
        KernelShape::Triangular => (1.0 - x / support).max(0.0),
    }
}

/// Literal evaluation of the defining sums, entry by entry, over ordered
/// pairs `p ≠ q` in input order.
pub fn brute_force_estimator(
    pattern: &MarkedPointPattern,
    ell: usize,
    probs: &[f64],
    kind: EstimatorKind,
    smoothing: Option<OracleSmoothing>,
) -> DMatrix<f64> {
    brute_force_terms(pattern, ell, probs, kind, smoothing).0
}

/// Sum of the absolute values of the terms of each entry: the scale against
/// which a rounding error in the sum is measured.
pub fn brute_force_magnitude(
    pattern: &MarkedPointPattern,
    ell: usize,
    probs: &[f64],
    kind: EstimatorKind,
    smoothing: Option<OracleSmoothing>,
) -> DMatrix<f64> {
    brute_force_terms(pattern, ell, probs, kind, smoothing).1
}

fn brute_force_terms(
    pattern: &MarkedPointPattern,
    ell: usize,
    probs: &[f64],
    kind: EstimatorKind,
    smoothing: Option<OracleSmoothing>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let sides = pattern.window().sides();
    let area = sides[0] * sides[1];
    let pts = pattern.points();
    let bins: Vec<Option<usize>> = pattern
        .marks()
        .iter()
        .map(|m| naive_bin(m.theta(), ell))
        .collect();
    let n = pts.len();
    let mut value = DMatrix::zeros(ell, ell);
    let mut magnitude = DMatrix::zeros(ell, ell);
    for i in 0..ell {
        for j in 0..ell {
            let mut first = 0.0;
            let mut first_abs = 0.0;
            for p in 0..n {
                let both = if i == j { indicator(bins[p], i) } else { 0.0 };
                first += both - probs[i] * probs[j];
                first_abs += (both - probs[i] * probs[j]).abs();
            }
            first /= area;
            first_abs /= area;
            let mut second = 0.0;
            let mut second_abs = 0.0;
            for p in 0..n {
                for q in 0..n {
                    if p == q {
                        continue;
                    }
                    let d = [pts[q][0] - pts[p][0], pts[q][1] - pts[p][1]];
                    let weight = match kind {
                        EstimatorKind::EdgeCorrected => 1.0 / set_covariance(sides, d),
                        EstimatorKind::Naive => 1.0 / area,
                        EstimatorKind::Smoothed => {
                            let s = smoothing.expect("smoothed estimator needs smoothing");
                            let dist = (d[0] * d[0] + d[1] * d[1]).sqrt();
                            kernel(s.shape, s.support, dist / s.smoothing_length)
                                / set_covariance(sides, d)
                        }
                        EstimatorKind::MonteCarlo => unreachable!("not a single-pattern estimator"),
                    };
                    let term = (indicator(bins[p], i) - probs[i])
                        * (indicator(bins[q], j) - probs[j])
                        * weight;
                    second += term;
                    second_abs += term.abs();
                }
            }
            value[(i, j)] = first + second;
            magnitude[(i, j)] = first_abs + second_abs;
        }
    }
    (value, magnitude)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 30)
}

/// Regularized lower incomplete gamma `P(s, x)` by quadrature.
///
/// With `t = u²` the integrand becomes `2 u^{2s-1} e^{-u²}`, smooth on
/// `[0, ∞)` for `s ≥ 1/2`; the normalizer is the same integral to `u = 40`.
pub fn gamma_regularized_oracle(s: f64, x: f64) -> f64 {
    assert!(s >= 0.5 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let f = |u: f64| 2.0 * u.powf(2.0 * s - 1.0) * (-u * u).exp();
    let upper = 40.0f64.max(2.0 * s.sqrt() + 30.0);
    let total = piecewise(&f, 0.0, upper);
    let part = piecewise(&f, 0.0, x.sqrt().min(upper));
    (part / total).min(1.0)
}

/// Nodes and weights of `n`-point Gauss-Legendre on `[-1, 1]`, by Newton
/// iteration on the three-term recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite 20-point Gauss-Legendre on 256 equal panels.
fn piecewise<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let rule = gauss_legendre(20);
    let pieces = 256;
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        let mid = a + (k as f64 + 0.5) * h;
        total += rule
            .iter()
            .map(|&(x, w)| w * f(mid + 0.5 * h * x))
            .sum::<f64>()
            * 0.5
            * h;
    }
    total
}

pub fn chi2_cdf_oracle(x: f64, df: usize) -> f64 {
    gamma_regularized_oracle(0.5 * df as f64, 0.5 * x)
}

/// Quantile by bisection on the quadrature cdf.
pub fn chi2_quantile_oracle(p: f64, df: usize) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while chi2_cdf_oracle(hi, df) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf_oracle(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Perimeter of the ellipse with semi-axes `a`, `b` by quadrature of the
/// speed `sqrt(a² sin² t + b² cos² t)`.
pub fn ellipse_perimeter_oracle(a: f64, b: f64) -> f64 {
    let speed = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
    4.0 * piecewise(&speed, 0.0, 0.5 * PI)
}
