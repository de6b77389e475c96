//! Boolean models of axis-parallel ellipses and the Poisson process on the
//! boundary of their union, marked by outer unit normals.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Window};
use crate::model::{fold_direction, DirectionMark, MarkedPointPattern};
use crate::seeding::{rng_from_seed, SimRng};
use crate::testkit::chi2::gamma_quantile;

/// Interior test slack: a point is covered iff `q < 1 - COVER_TOL`.
pub const COVER_TOL: f64 = 1e-12;

/// Parameters of the boundary Cox process of a Boolean model.
///
/// Grains are ellipses with semi-axes `(elongation · R, R)` along the
/// coordinate axes, `R ~ Gamma(shape, scale)`. The defaults are the
/// isotropic disc model with germ intensity 1.5e-4, gamma scale 4.5, shape 9
/// and boundary intensity 0.1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryCoxConfig {
    pub germ_intensity: f64,
    pub radius_scale: f64,
    pub radius_shape: f64,
    pub elongation: f64,
    pub boundary_intensity: f64,
    pub margin_quantile: f64,
}

impl Default for BoundaryCoxConfig {
    fn default() -> Self {
        Self {
            germ_intensity: 1.5e-4,
            radius_scale: 4.5,
            radius_shape: 9.0,
            elongation: 1.0,
            boundary_intensity: 0.1,
            margin_quantile: 1.0 - 1e-9,
        }
    }
}

impl BoundaryCoxConfig {
    pub fn with_elongation(self, elongation: f64) -> Self {
        Self { elongation, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("germ_intensity", self.germ_intensity),
            ("radius_scale", self.radius_scale),
            ("radius_shape", self.radius_shape),
            ("boundary_intensity", self.boundary_intensity),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.elongation >= 1.0 && self.elongation.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "elongation must be at least 1, got {}",
                self.elongation
            )));
        }
        if !(self.margin_quantile > 0.0 && self.margin_quantile < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "margin_quantile must lie in (0, 1), got {}",
                self.margin_quantile
            )));
        }
        Ok(())
    }

    pub fn mean_radius(&self) -> f64 {
        self.radius_scale * self.radius_shape
    }

    pub fn mean_square_radius(&self) -> f64 {
        self.radius_scale * self.radius_scale * self.radius_shape * (self.radius_shape + 1.0)
    }

    /// Mean length of boundary per unit area of the union,
    /// `λ E[perimeter] exp(-λ E[area])`.
    pub fn expected_boundary_length_density(&self) -> f64 {
        let mean_perimeter = self.mean_radius() * ellipse_perimeter(self.elongation, 1.0);
        let mean_area = PI * self.elongation * self.mean_square_radius();
        self.germ_intensity * mean_perimeter * (-self.germ_intensity * mean_area).exp()
    }

    /// Expected number of boundary points per unit area.
    pub fn expected_point_density(&self) -> f64 {
        self.boundary_intensity * self.expected_boundary_length_density()
    }

    /// Buffer around the window in which germs are still sampled.
    pub fn margin(&self) -> Result<f64> {
        Ok(self.elongation
            * gamma_quantile(self.radius_shape, self.radius_scale, self.margin_quantile)?)
    }
}

/// Axis-parallel ellipse `((x-cx)/a)² + ((y-cy)/b)² ≤ 1` with `a ≥ b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grain {
    center: Point,
    semi_axes: [f64; 2],
}

impl Grain {
    pub fn new(center: Point, semi_axes: [f64; 2]) -> Result<Self> {
        let [a, b] = semi_axes;
        if !(b > 0.0 && a >= b && a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grain semi-axes must satisfy a ≥ b > 0, got ({a}, {b})"
            )));
        }
        Ok(Self { center, semi_axes })
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn semi_axes(&self) -> [f64; 2] {
        self.semi_axes
    }

    pub fn elongation(&self) -> f64 {
        self.semi_axes[0] / self.semi_axes[1]
    }

    fn level(&self, p: Point) -> f64 {
        let u = (p[0] - self.center[0]) / self.semi_axes[0];
        let v = (p[1] - self.center[1]) / self.semi_axes[1];
        u * u + v * v
    }

    /// Whether `p` lies in the open interior; the boundary itself is not
    /// covered.
    pub fn covers(&self, p: Point) -> bool {
        self.level(p) < 1.0 - COVER_TOL
    }
}

const GAUSS_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
    0.236_926_885_056_189_08,
];

/// Cumulative arc length of `t ↦ (a cos t, b sin t)` tabulated on equal
/// panels, with Newton inversion for arc-length-uniform placement.
#[derive(Debug, Clone)]
pub struct ArcLengthTable {
    a: f64,
    b: f64,
    step: f64,
    cumulative: Vec<f64>,
}

impl ArcLengthTable {
    const INITIAL_PANELS: usize = 4096;
    const REL_TOL: f64 = 1e-10;

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ellipse axes ({a}, {b}) must be positive"
            )));
        }
        let mut panels = Self::INITIAL_PANELS;
        loop {
            let table = Self::build(a, b, panels);
            let finer = Self::build(a, b, 2 * panels);
            let rel = (table.perimeter() - finer.perimeter()).abs() / finer.perimeter();
            if rel <= Self::REL_TOL || panels >= 1 << 20 {
                return Ok(finer);
            }
            panels *= 2;
        }
    }

    fn build(a: f64, b: f64, panels: usize) -> Self {
        let step = 2.0 * PI / panels as f64;
        let mut table = Self {
            a,
            b,
            step,
            cumulative: Vec::with_capacity(panels + 1),
        };
        let mut sum = 0.0;
        table.cumulative.push(0.0);
        for k in 0..panels {
            let t0 = k as f64 * step;
            sum += table.integrate(t0, t0 + step);
            table.cumulative.push(sum);
        }
        table
    }

    fn speed(&self, t: f64) -> f64 {
        let (s, c) = t.sin_cos();
        (self.a * self.a * s * s + self.b * self.b * c * c).sqrt()
    }

    fn integrate(&self, t0: f64, t1: f64) -> f64 {
        let half = 0.5 * (t1 - t0);
        let mid = 0.5 * (t0 + t1);
        GAUSS_NODES
            .iter()
            .zip(GAUSS_WEIGHTS.iter())
            .map(|(x, w)| w * self.speed(mid + half * x))
            .sum::<f64>()
            * half
    }

    pub fn perimeter(&self) -> f64 {
        *self.cumulative.last().expect("table is never empty")
    }

    fn panels(&self) -> usize {
        self.cumulative.len() - 1
    }

    /// Arc length from parameter 0 to `t ∈ [0, 2π]`.
    pub fn arc_length_to(&self, t: f64) -> f64 {
        let k = ((t / self.step) as usize).min(self.panels() - 1);
        let t0 = k as f64 * self.step;
        self.cumulative[k] + self.integrate(t0, t)
    }

    /// Parameter `t` at which the arc length from 0 equals `s`.
    pub fn parameter_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.perimeter());
        let k = (self.cumulative.partition_point(|&c| c <= s).max(1) - 1).min(self.panels() - 1);
        let (c0, c1) = (self.cumulative[k], self.cumulative[k + 1]);
        let t0 = k as f64 * self.step;
        let t1 = t0 + self.step;
        let mut t = t0 + (s - c0) / (c1 - c0) * self.step;
        for _ in 0..16 {
            let err = self.cumulative[k] + self.integrate(t0, t) - s;
            let next = (t - err / self.speed(t)).clamp(t0, t1);
            let done =
                (next - t).abs() <= 1e-15 * (1.0 + t) || err.abs() <= 1e-13 * self.perimeter();
            t = next;
            if done {
                break;
            }
        }
        t
    }
}

/// Perimeter of the ellipse with semi-axes `a`, `b`.
pub fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    ArcLengthTable::new(a, b)
        .map(|t| t.perimeter())
        .unwrap_or(f64::NAN)
}

/// A boundary point with its outer unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub position: Point,
    pub normal: [f64; 2],
    pub grain: usize,
}

/// Samples Poisson points uniformly in arc length on grains of one shape.
///
/// All grains of a Boolean model share the axis ratio, so one table of the
/// reference ellipse `(ratio, 1)` serves every grain by scaling.
#[derive(Debug, Clone)]
pub struct BoundarySampler {
    ratio: f64,
    table: ArcLengthTable,
}

impl BoundarySampler {
    pub fn new(ratio: f64) -> Result<Self> {
        if !(ratio >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "axis ratio {ratio} must be at least 1"
            )));
        }
        Ok(Self {
            ratio,
            table: ArcLengthTable::new(ratio, 1.0)?,
        })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn reference_perimeter(&self) -> f64 {
        self.table.perimeter()
    }

    /// Points on `∂g` from a Poisson process with `intensity` per unit length.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        grain: &Grain,
        grain_index: usize,
        intensity: f64,
        rng: &mut R,
    ) -> Vec<BoundaryPoint> {
        let [a, b] = grain.semi_axes;
        debug_assert!((grain.elongation() - self.ratio).abs() <= 1e-12 * self.ratio);
        let mean = intensity * b * self.table.perimeter();
        let n = poisson_count(mean, rng);
        (0..n)
            .map(|_| {
                let s = rng.random::<f64>() * self.table.perimeter();
                let t = self.table.parameter_at(s);
                let (sin, cos) = t.sin_cos();
                let (nx, ny) = (cos / a, sin / b);
                let norm = nx.hypot(ny);
                BoundaryPoint {
                    position: [grain.center[0] + a * cos, grain.center[1] + b * sin],
                    normal: [nx / norm, ny / norm],
                    grain: grain_index,
                }
            })
            .collect()
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite Poisson mean");
    dist.sample(rng) as usize
}

/// Boundary points of a single grain (builds a table for its shape).
pub fn ellipse_boundary_sampler<R: Rng + ?Sized>(
    grain: &Grain,
    intensity: f64,
    rng: &mut R,
) -> Result<Vec<BoundaryPoint>> {
    if !(intensity > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "boundary intensity {intensity} must be positive"
        )));
    }
    let sampler = BoundarySampler::new(grain.elongation())?;
    Ok(sampler.sample(grain, 0, intensity, rng))
}

/// Homogeneous Poisson germs on `window` dilated by `margin`.
pub fn sample_germs<R: Rng + ?Sized>(
    window: &Window,
    margin: f64,
    intensity: f64,
    rng: &mut R,
) -> Result<Vec<Point>> {
    if !(intensity > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "germ intensity {intensity} must be positive"
        )));
    }
    if !(margin >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "margin {margin} must be non-negative"
        )));
    }
    let region = window.dilated(margin)?;
    let n = poisson_count(intensity * region.area(), rng);
    let [x0, y0] = region.origin();
    let [l1, l2] = region.sides();
    Ok((0..n)
        .map(|_| [x0 + rng.random::<f64>() * l1, y0 + rng.random::<f64>() * l2])
        .collect())
}

/// Attaches an independent gamma radius to each germ. The minor semi-axis is
/// the radius; the major one (along x) is `elongation · radius`.
pub fn sample_grains<R: Rng + ?Sized>(
    germs: &[Point],
    cfg: &BoundaryCoxConfig,
    rng: &mut R,
) -> Result<Vec<Grain>> {
    cfg.validate()?;
    let law = Gamma::new(cfg.radius_shape, cfg.radius_scale)
        .map_err(|e| Error::InvalidConfig(format!("gamma radius law: {e}")))?;
    germs
        .iter()
        .map(|&c| {
            let r: f64 = law.sample(rng).max(f64::MIN_POSITIVE);
            Grain::new(c, [cfg.elongation * r, r])
        })
        .collect()
}

/// Uniform bucket grid over grain bounding boxes.
struct GrainIndex {
    origin: Point,
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

impl GrainIndex {
    const MAX_DIM: usize = 1024;

    fn new(grains: &[Grain]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut width_sum = 0.0;
        for g in grains {
            let [a, b] = g.semi_axes;
            lo[0] = lo[0].min(g.center[0] - a);
            lo[1] = lo[1].min(g.center[1] - b);
            hi[0] = hi[0].max(g.center[0] + a);
            hi[1] = hi[1].max(g.center[1] + b);
            width_sum += 2.0 * a;
        }
        if grains.is_empty() {
            return Self {
                origin: [0.0, 0.0],
                cell: 1.0,
                dims: [0, 0],
                buckets: Vec::new(),
            };
        }
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        let cell = (width_sum / grains.len() as f64).max(extent / Self::MAX_DIM as f64);
        let dims = [
            (((hi[0] - lo[0]) / cell).ceil() as usize).max(1),
            (((hi[1] - lo[1]) / cell).ceil() as usize).max(1),
        ];
        let mut index = Self {
            origin: lo,
            cell,
            dims,
            buckets: vec![Vec::new(); dims[0] * dims[1]],
        };
        for (gi, g) in grains.iter().enumerate() {
            let [a, b] = g.semi_axes;
            let i0 = index.coord(g.center[0] - a, 0);
            let i1 = index.coord(g.center[0] + a, 0);
            let j0 = index.coord(g.center[1] - b, 1);
            let j1 = index.coord(g.center[1] + b, 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    index.buckets[j * dims[0] + i].push(gi);
                }
            }
        }
        index
    }

    fn coord(&self, v: f64, axis: usize) -> usize {
        let k = ((v - self.origin[axis]) / self.cell).floor();
        (k.max(0.0) as usize).min(self.dims[axis] - 1)
    }

    fn candidates(&self, p: Point) -> &[usize] {
        if self.buckets.is_empty() {
            return &[];
        }
        let i = self.coord(p[0], 0);
        let j = self.coord(p[1], 1);
        &self.buckets[j * self.dims[0] + i]
    }
}

/// Keeps the candidates that are not interior to any grain other than the
/// one they were generated on, i.e. the points on the boundary of the union.
pub fn thin_covered(candidates: &[BoundaryPoint], grains: &[Grain]) -> Vec<BoundaryPoint> {
    let index = GrainIndex::new(grains);
    candidates
        .iter()
        .filter(|c| {
            !index
                .candidates(c.position)
                .iter()
                .any(|&gi| gi != c.grain && grains[gi].covers(c.position))
        })
        .copied()
        .collect()
}

/// One simulated realization: the grains and the marked boundary pattern.
#[derive(Debug, Clone)]
pub struct Realization {
    pub grains: Vec<Grain>,
    pub pattern: MarkedPointPattern,
}

pub fn simulate_realization(
    cfg: &BoundaryCoxConfig,
    window: &Window,
    seed: u64,
) -> Result<Realization> {
    cfg.validate()?;
    let mut rng: SimRng = rng_from_seed(seed);
    let margin = cfg.margin()?;
    let germs = sample_germs(window, margin, cfg.germ_intensity, &mut rng)?;
    let grains = sample_grains(&germs, cfg, &mut rng)?;
    let sampler = BoundarySampler::new(cfg.elongation)?;

    let mut candidates = Vec::new();
    for (gi, g) in grains.iter().enumerate() {
        candidates.extend(
            sampler
                .sample(g, gi, cfg.boundary_intensity, &mut rng)
                .into_iter()
                .filter(|bp| window.contains(bp.position)),
        );
    }
    let kept = thin_covered(&candidates, &grains);
    let mut points = Vec::with_capacity(kept.len());
    let mut marks = Vec::with_capacity(kept.len());
    for bp in kept {
        points.push(bp.position);
        marks.push(fold_direction(bp.normal)?);
    }
    let pattern = MarkedPointPattern::new(points, marks, *window)?;
    Ok(Realization { grains, pattern })
}

/// Simulates the marked boundary process observed in `window`.
pub fn simulate_pattern(
    cfg: &BoundaryCoxConfig,
    window: &Window,
    seed: u64,
) -> Result<MarkedPointPattern> {
    simulate_realization(cfg, window, seed).map(|r| r.pattern)
}

/// A stationary marked point process that can be simulated in a window.
pub trait PatternModel: Sync {
    fn simulate(&self, window: &Window, seed: u64) -> Result<MarkedPointPattern>;
}

impl PatternModel for BoundaryCoxConfig {
    fn simulate(&self, window: &Window, seed: u64) -> Result<MarkedPointPattern> {
        simulate_pattern(self, window, seed)
    }
}

/// Homogeneous Poisson process with i.i.d. uniform directions on `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependentPoissonModel {
    pub intensity: f64,
}

impl PatternModel for IndependentPoissonModel {
    fn simulate(&self, window: &Window, seed: u64) -> Result<MarkedPointPattern> {
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "intensity {} must be non-negative",
                self.intensity
            )));
        }
        let mut rng = rng_from_seed(seed);
        let n = poisson_count(self.intensity * window.area(), &mut rng);
        let [x0, y0] = window.origin();
        let [l1, l2] = window.sides();
        let mut points = Vec::with_capacity(n);
        let mut marks = Vec::with_capacity(n);
        for _ in 0..n {
            points.push([x0 + rng.random::<f64>() * l1, y0 + rng.random::<f64>() * l2]);
            marks.push(DirectionMark::new(rng.random::<f64>() * PI)?);
        }
        MarkedPointPattern::new(points, marks, *window)
    }
}
