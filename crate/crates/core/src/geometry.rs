//! Observation windows.
//!
//! Windows are axis-aligned rectangles. Everything the estimators need from a
//! window (area, inradius, set covariance) is closed-form for rectangles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::{simulate_pattern, BoundaryCoxConfig};

/// A point in the plane.
pub type Point = [f64; 2];

/// Axis-aligned rectangle `[x0, x0 + L1] × [y0, y0 + L2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    origin: Point,
    sides: [f64; 2],
}

impl Window {
    pub fn new(origin: Point, sides: [f64; 2]) -> Result<Self> {
        let [l1, l2] = sides;
        if !(l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite()) {
            return Err(Error::InvalidWindow(l1, l2));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "window origin must be finite, got ({}, {})",
                origin[0], origin[1]
            )));
        }
        Ok(Self { origin, sides })
    }

    /// Square of side `side` with its lower-left corner at the origin.
    pub fn square(side: f64) -> Result<Self> {
        Self::new([0.0, 0.0], [side, side])
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn sides(&self) -> [f64; 2] {
        self.sides
    }

    pub fn area(&self) -> f64 {
        self.sides[0] * self.sides[1]
    }

    /// Length of the boundary, `2(L1 + L2)`.
    pub fn boundary_length(&self) -> f64 {
        2.0 * (self.sides[0] + self.sides[1])
    }

    /// Radius of the largest inscribed disc.
    pub fn inradius(&self) -> f64 {
        0.5 * self.sides[0].min(self.sides[1])
    }

    pub fn diameter(&self) -> f64 {
        self.sides[0].hypot(self.sides[1])
    }

    /// Closed-set membership.
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.origin[0]
            && p[0] <= self.origin[0] + self.sides[0]
            && p[1] >= self.origin[1]
            && p[1] <= self.origin[1] + self.sides[1]
    }

    /// The window grown by `margin` on every side.
    pub fn dilated(&self, margin: f64) -> Result<Self> {
        Self::new(
            [self.origin[0] - margin, self.origin[1] - margin],
            [self.sides[0] + 2.0 * margin, self.sides[1] + 2.0 * margin],
        )
    }

    /// `|W ∩ (W − y)|`, the overlap of the window with its translate.
    ///
    /// Symmetric in `shift`; zero once the translates are disjoint.
    pub fn set_covariance(&self, shift: [f64; 2]) -> f64 {
        (self.sides[0] - shift[0].abs()).max(0.0) * (self.sides[1] - shift[1].abs()).max(0.0)
    }

    /// Area of the Minkowski sum with a disc of radius `r` (Steiner formula).
    pub fn dilated_ball_area(&self, r: f64) -> f64 {
        self.area() + self.boundary_length() * r + std::f64::consts::PI * r * r
    }

    /// Number of unit lattice cells `[-1/2, 1/2)² + z` that meet the window in
    /// a set of positive area.
    pub fn grid_cells_hit(&self) -> u64 {
        let count_axis = |lo: f64, len: f64| -> u64 {
            // integers z with z - 1/2 < lo + len and z + 1/2 > lo
            let a = lo - 0.5;
            let b = lo + len + 0.5;
            let n = b.ceil() - a.floor() - 1.0;
            n.max(0.0) as u64
        };
        count_axis(self.origin[0], self.sides[0]) * count_axis(self.origin[1], self.sides[1])
    }
}

/// Pilot-simulation refinement settings for [`window_for_expected_points`].
#[derive(Debug, Clone, Copy)]
pub struct PilotCalibration {
    pub replications: usize,
    pub seed: u64,
    pub rel_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PilotCalibration {
    fn default() -> Self {
        Self {
            replications: 100,
            seed: 0x5eed_0001,
            rel_tolerance: 0.02,
            max_iterations: 20,
        }
    }
}

/// Square window whose expected in-window boundary-point count under `model`
/// is `target_count`.
///
/// The side is first set from the specific boundary length of the Boolean
/// model. With `pilot` set, the side is rescaled by `sqrt(target / mean)`
/// until a pilot mean lands within the relative tolerance.
pub fn window_for_expected_points(
    model: &BoundaryCoxConfig,
    target_count: usize,
    pilot: Option<PilotCalibration>,
) -> Result<Window> {
    if target_count == 0 {
        return Err(Error::InvalidArgument(
            "target_count must be at least 1".into(),
        ));
    }
    if !(model.germ_intensity > 0.0) || !(model.boundary_intensity > 0.0) {
        return Err(Error::Calibration(
            "model produces no boundary points (zero germ or boundary intensity)".into(),
        ));
    }
    model.validate()?;
    let density = model.expected_point_density();
    if !(density > 0.0) || !density.is_finite() {
        return Err(Error::Calibration(format!(
            "expected point density {density} is not positive"
        )));
    }
    let target = target_count as f64;
    let mut side = (target / density).sqrt();
    let Some(pilot) = pilot else {
        return Window::square(side);
    };
    if pilot.replications == 0 {
        return Err(Error::InvalidArgument(
            "pilot replications must be at least 1".into(),
        ));
    }
    for iteration in 0..pilot.max_iterations {
        let window = Window::square(side)?;
        let counts = (0..pilot.replications)
            .into_par_iter()
            .map(|nu| {
                let seed = crate::seeding::derive_seed(pilot.seed, &[iteration as u64, nu as u64]);
                simulate_pattern(model, &window, seed).map(|p| p.len())
            })
            .collect::<Result<Vec<_>>>()?;
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        if mean == 0.0 {
            return Err(Error::Calibration(format!(
                "pilot simulation on side {side} produced no points"
            )));
        }
        if ((mean - target) / target).abs() <= pilot.rel_tolerance {
            return Ok(window);
        }
        side *= (target / mean).sqrt();
    }
    Err(Error::Calibration(format!(
        "pilot calibration did not reach {}% within {} iterations",
        pilot.rel_tolerance * 100.0,
        pilot.max_iterations
    )))
}
