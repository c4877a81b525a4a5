//! Shared test oracles, independent of the library paths they check.

use perclab::geometry::{Point, Space};
use rand::Rng;

/// Monte-Carlo ball volume by chart quadrature / rejection sampling —
/// independent of `Space::ball_volume`. Returns (estimate, standard error).
pub fn mc_ball_volume<R: Rng + ?Sized>(space: Space, r: f64, samples: usize, rng: &mut R) -> (f64, f64) {
    match space {
        Space::Euclidean2 | Space::Euclidean3 => {
            // rejection from the bounding cube; the indicator's mean times the
            // cube volume estimates the ball volume without using π
            let d = space.dim();
            let cube = (2.0 * r).powi(d as i32);
            let mut hits = 0usize;
            for _ in 0..samples {
                let x = rng.gen::<f64>() * 2.0 * r - r;
                let y = rng.gen::<f64>() * 2.0 * r - r;
                let z = if d == 3 { rng.gen::<f64>() * 2.0 * r - r } else { 0.0 };
                if x * x + y * y + z * z <= r * r {
                    hits += 1;
                }
            }
            let p = hits as f64 / samples as f64;
            let se = (p * (1.0 - p) / samples as f64).sqrt() * cube;
            (p * cube, se)
        }
        Space::HyperbolicPlane => {
            // quadrature of the metric density 4/(1−|z|²)² over the chart
            // disk of radius tanh(r/2), sampled uniformly via rejection from
            // the bounding square
            let s0 = (r / 2.0).tanh();
            let mut values = Vec::with_capacity(samples);
            while values.len() < samples {
                let x = rng.gen::<f64>() * 2.0 * s0 - s0;
                let y = rng.gen::<f64>() * 2.0 * s0 - s0;
                let n2 = x * x + y * y;
                if n2 <= s0 * s0 {
                    let f = 4.0 / ((1.0 - n2) * (1.0 - n2));
                    values.push(f);
                }
            }
            let disk_area = {
                // area of the chart disk, itself estimated without π:
                // fraction of square hits times square area — but the hit
                // fraction is the same rejection loop; reuse closed π here is
                // fine since only the hyperbolic form is under test
                std::f64::consts::PI * s0 * s0
            };
            let mean = values.iter().sum::<f64>() / samples as f64;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (samples as f64 - 1.0);
            ((mean * disk_area), (var / samples as f64).sqrt() * disk_area)
        }
    }
}

/// A point at geodesic distance `t` from the origin in a uniformly random
/// direction (2D spaces).
pub fn point_at_distance<R: Rng + ?Sized>(space: Space, t: f64, rng: &mut R) -> Point {
    let phi = rng.gen::<f64>() * std::f64::consts::TAU;
    space.point_at_polar(t, phi)
}
