#![allow(dead_code)]

pub mod oracle;

use markgof::{DirectionMark, MarkedPointPattern, Window};
use rand::Rng;

/// Random simple pattern of up to `max_points` points in a random rectangle.
pub fn random_small_pattern<R: Rng>(rng: &mut R, max_points: usize) -> MarkedPointPattern {
    let origin = [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)];
    let sides = [rng.random_range(1.0..40.0), rng.random_range(1.0..40.0)];
    let window = Window::new(origin, sides).unwrap();
    let n = rng.random_range(0..=max_points);
    let points = (0..n)
        .map(|_| {
            [
                origin[0] + rng.random::<f64>() * sides[0],
                origin[1] + rng.random::<f64>() * sides[1],
            ]
        })
        .collect();
    let marks = (0..n)
        .map(|_| DirectionMark::new(rng.random::<f64>() * std::f64::consts::PI).unwrap())
        .collect();
    MarkedPointPattern::new(points, marks, window).unwrap()
}

pub fn max_abs_diff(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).amax()
}
