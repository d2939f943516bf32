//! Deterministic procedural images for experiments and tests: smooth color
//! fields overlaid with oriented gratings and hard-edged shapes.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Size;
use crate::raster::ImageBuffer;

struct Grating {
    freq: [f64; 2],
    phase: f64,
    center: [f64; 2],
    radius: f64,
    color: [f64; 3],
}

enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    Rect { lo: [f64; 2], hi: [f64; 2] },
}

/// A texture-rich RGB image, fully determined by `seed` and `size`.
pub fn synthetic_image(seed: u64, size: Size) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0da7a);
    let (h, w) = (size.h as f64, size.w as f64);
    let base: [[f64; 3]; 3] = [
        [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)],
        [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)],
        [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)],
    ];
    let gratings: Vec<Grating> = (0..4)
        .map(|_| {
            let cycles: f64 = rng.random_range(0.04..0.22);
            let angle: f64 = rng.random_range(0.0..PI);
            Grating {
                freq: [cycles * angle.cos(), cycles * angle.sin()],
                phase: rng.random_range(0.0..2.0 * PI),
                center: [rng.random_range(0.0..w), rng.random_range(0.0..h)],
                radius: rng.random_range(0.25..0.6) * w.max(h),
                color: [rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25)],
            }
        })
        .collect();
    let shapes: Vec<(Shape, [f64; 3])> = (0..5)
        .map(|_| {
            let color = [rng.random(), rng.random(), rng.random()];
            let shape = if rng.random_bool(0.5) {
                Shape::Disk {
                    center: [rng.random_range(0.0..w), rng.random_range(0.0..h)],
                    radius: rng.random_range(0.05..0.2) * w.min(h),
                }
            } else {
                let lo = [rng.random_range(0.0..0.8 * w), rng.random_range(0.0..0.8 * h)];
                Shape::Rect {
                    lo,
                    hi: [lo[0] + rng.random_range(0.1..0.3) * w, lo[1] + rng.random_range(0.1..0.3) * h],
                }
            };
            (shape, color)
        })
        .collect();

    ImageBuffer::from_fn(size, |r, c| {
        let (x, y) = (c as f64 + 0.5, r as f64 + 0.5);
        let (u, v) = (x / w - 0.5, y / h - 0.5);
        let mut px = [0.0; 3];
        for k in 0..3 {
            px[k] = base[0][k] + base[1][k] * u + base[2][k] * v;
        }
        for g in &gratings {
            let d2 = (x - g.center[0]).powi(2) + (y - g.center[1]).powi(2);
            let env = (-d2 / (g.radius * g.radius)).exp();
            let s = (2.0 * PI * (g.freq[0] * x + g.freq[1] * y) + g.phase).sin();
            for k in 0..3 {
                px[k] += env * s * g.color[k];
            }
        }
        for (shape, color) in &shapes {
            let inside = match shape {
                Shape::Disk { center, radius } => {
                    (x - center[0]).hypot(y - center[1]) < *radius
                }
                Shape::Rect { lo, hi } => x >= lo[0] && x < hi[0] && y >= lo[1] && y < hi[1],
            };
            if inside {
                for k in 0..3 {
                    px[k] = 0.35 * px[k] + 0.65 * color[k];
                }
            }
        }
        px.map(|v| v.clamp(0.0, 1.0) as f32)
    })
}

/// Gray image varying only along the width: `0.5 + 0.4 cos(2π x / period)`.
pub fn horizontal_sinusoid(size: Size, period: f64) -> ImageBuffer {
    ImageBuffer::from_fn(size, |_, c| {
        let v = 0.5 + 0.4 * (2.0 * PI * (c as f64 + 0.5) / period).cos();
        [v as f32; 3]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = synthetic_image(3, Size::new(32, 40));
        let b = synthetic_image(3, Size::new(32, 40));
        assert_eq!(a, b);
        assert_ne!(a, synthetic_image(4, Size::new(32, 40)));
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
