//! Classical inverse-mapping warpers.
//!
//! Each output pixel is mapped through `f⁻¹` and the input is interpolated
//! there with a separable kernel. Taps falling off the image are clamped to
//! the nearest edge pixel; validity depends only on the mapped point.

use crate::geometry::{NormalizedCoord, Transform};
use crate::raster::ImageBuffer;

/// Keys cubic convolution parameter.
pub const KEYS_A: f64 = -0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel1D {
    /// Tent, support 2.
    Bilinear,
    /// Keys cubic with `a = -0.5`, support 4.
    Bicubic,
}

impl Kernel1D {
    pub fn support(self) -> usize {
        match self {
            Kernel1D::Bilinear => 2,
            Kernel1D::Bicubic => 4,
        }
    }

    /// Kernel value at signed distance `t` from a node.
    pub fn eval(self, t: f64) -> f64 {
        let t = t.abs();
        match self {
            Kernel1D::Bilinear => (1.0 - t).max(0.0),
            Kernel1D::Bicubic => {
                let a = KEYS_A;
                if t <= 1.0 {
                    ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
                } else if t < 2.0 {
                    ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
                } else {
                    0.0
                }
            }
        }
    }

    /// First tap index and weights for continuous index `c` (pixel centers at
    /// integers).
    fn taps(self, c: f64) -> (isize, [f64; 4]) {
        let i0 = c.floor();
        let f = c - i0;
        match self {
            Kernel1D::Bilinear => (i0 as isize, [1.0 - f, f, 0.0, 0.0]),
            Kernel1D::Bicubic => (
                i0 as isize - 1,
                [self.eval(f + 1.0), self.eval(f), self.eval(1.0 - f), self.eval(2.0 - f)],
            ),
        }
    }
}

/// Interpolate `img` at normalized `x` with clamp-to-edge taps.
pub fn sample(img: &ImageBuffer, x: NormalizedCoord, kernel: Kernel1D) -> [f64; 3] {
    let (h, w) = (img.height() as isize, img.width() as isize);
    let p = x.to_pixel(img.size());
    let (cx0, wx) = kernel.taps(p[0] - 0.5);
    let (cy0, wy) = kernel.taps(p[1] - 0.5);
    let n = kernel.support();
    let mut out = [0.0; 3];
    for (dy, &ky) in wy.iter().enumerate().take(n) {
        let r = (cy0 + dy as isize).clamp(0, h - 1) as usize;
        let mut row = [0.0; 3];
        for (dx, &kx) in wx.iter().enumerate().take(n) {
            let c = (cx0 + dx as isize).clamp(0, w - 1) as usize;
            let px = img.get(r, c);
            for k in 0..3 {
                row[k] += kx * px[k] as f64;
            }
        }
        for k in 0..3 {
            out[k] += ky * row[k];
        }
    }
    out
}

/// Warp `img` onto the output grid of `t`. Pixels whose preimage leaves the
/// input are masked.
pub fn classical_warp(img: &ImageBuffer, t: &Transform, kernel: Kernel1D) -> ImageBuffer {
    let out_size = t.out_size();
    let mut out = ImageBuffer::new(out_size);
    let mut mask = vec![false; out_size.area()];
    for r in 0..out_size.h {
        for c in 0..out_size.w {
            if let Some(x) = t.apply_inverse(NormalizedCoord::pixel_center(r, c, out_size)) {
                let v = sample(img, x, kernel);
                out.set(r, c, [v[0] as f32, v[1] as f32, v[2] as f32]);
                mask[r * out_size.w + c] = true;
            }
        }
    }
    out.set_mask(mask).expect("mask sized to output");
    out
}

/// Output pixels whose preimage lies inside the input image.
pub fn valid_mask(t: &Transform) -> Vec<bool> {
    let s = t.out_size();
    (0..s.area())
        .map(|i| {
            t.apply_inverse(NormalizedCoord::pixel_center(i / s.w, i % s.w, s))
                .is_some()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_homography, Regime, Size};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(size: Size, seed: u64) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageBuffer::from_fn(size, |_, _| [rng.random(), rng.random(), rng.random()])
    }

    #[test]
    fn kernels_partition_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in [Kernel1D::Bilinear, Kernel1D::Bicubic] {
            for _ in 0..1000 {
                let c: f64 = rng.random_range(-5.0..5.0);
                let (_, w) = k.taps(c);
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_reproduces_input() {
        let img = noise(Size::new(7, 11), 1);
        let t = Transform::identity(img.size());
        for k in [Kernel1D::Bilinear, Kernel1D::Bicubic] {
            let out = classical_warp(&img, &t, k);
            assert_eq!(out.data(), img.data(), "{k:?}");
            assert_eq!(out.valid_count(), img.size().area());
        }
    }

    #[test]
    fn constants_are_preserved() {
        let img = ImageBuffer::from_fn(Size::new(20, 24), |_, _| [0.3, 0.6, 0.9]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let t = sample_homography(&mut rng, Regime::InScale, Size::new(40, 40));
            for k in [Kernel1D::Bilinear, Kernel1D::Bicubic] {
                let out = classical_warp(&img, &t, k);
                for (i, px) in out.data().chunks(3).enumerate() {
                    if out.mask()[i] {
                        assert!((px[0] - 0.3).abs() < 1e-6 && (px[2] - 0.9).abs() < 1e-6);
                    } else {
                        assert_eq!(px, [0.0; 3]);
                    }
                }
            }
        }
    }

    /// Resize rows, then columns, with the Keys kernel written out directly.
    fn separable_resize(img: &ImageBuffer, s: usize) -> Vec<f64> {
        let keys = |t: f64| {
            let t = t.abs();
            if t <= 1.0 {
                1.5 * t * t * t - 2.5 * t * t + 1.0
            } else if t < 2.0 {
                -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0
            } else {
                0.0
            }
        };
        let resize_1d = |src: &[f64], n_out: usize| -> Vec<f64> {
            let n = src.len() as isize;
            (0..n_out)
                .map(|j| {
                    let c = (j as f64 + 0.5) / s as f64 - 0.5;
                    let base = c.floor() as isize;
                    (base - 1..=base + 2)
                        .map(|i| keys(c - i as f64) * src[i.clamp(0, n - 1) as usize])
                        .sum()
                })
                .collect()
        };
        let (h, w) = (img.height(), img.width());
        let mut out = vec![0.0; h * s * w * s * 3];
        for ch in 0..3 {
            let rows: Vec<Vec<f64>> = (0..h)
                .map(|r| {
                    let src: Vec<f64> = (0..w).map(|c| img.get(r, c)[ch] as f64).collect();
                    resize_1d(&src, w * s)
                })
                .collect();
            for c in 0..w * s {
                let col: Vec<f64> = rows.iter().map(|row| row[c]).collect();
                for (r, v) in resize_1d(&col, h * s).into_iter().enumerate() {
                    out[(r * w * s + c) * 3 + ch] = v;
                }
            }
        }
        out
    }

    #[test]
    fn bicubic_upscale_matches_separable_oracle() {
        let img = noise(Size::new(9, 12), 3);
        let t = Transform::axis_scale(2.0, 2.0, img.size()).unwrap();
        let out = classical_warp(&img, &t, Kernel1D::Bicubic);
        let want = separable_resize(&img, 2);
        let worst = out
            .data()
            .iter()
            .zip(&want)
            .map(|(&a, &b)| (a as f64 - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst:e}");
    }

    #[test]
    fn mask_tracks_preimage_domain() {
        let size = Size::new(16, 16);
        assert!(valid_mask(&Transform::identity(size)).iter().all(|&v| v));
        // Shift by half the width: x = y + 8.
        let t = Transform::homography([1.0, 0.0, 8.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], size, size).unwrap();
        let m = valid_mask(&t);
        assert_eq!(m.iter().filter(|&&v| v).count(), 8 * 16);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let t = sample_homography(&mut rng, Regime::InScale, Size::new(24, 24))
                .with_out_size(Size::new(24, 24));
            let m = valid_mask(&t);
            for (i, &v) in m.iter().enumerate() {
                let y = NormalizedCoord::pixel_center(i / 24, i % 24, t.out_size());
                assert_eq!(v, t.apply_inverse(y).is_some());
            }
        }
    }
}
