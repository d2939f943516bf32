//! Coordinate transformations between an output (warped) grid and an input
//! grid, plus their numerical derivatives.
//!
//! Every transform is stored as the *inverse* map `f⁻¹: Y → X`, taking output
//! pixels to input pixels, since that is what resampling needs. Two coordinate
//! systems are used:
//!
//! * pixel coordinates, continuous, with pixel `i` covering `[i, i + 1)` and
//!   its center at `i + 0.5`;
//! * normalized coordinates in `[-1, 1]`, with the center of pixel `i` of an
//!   `n`-pixel axis at `-1 + (2i + 1) / n`.
//!
//! Derivatives (Jacobian, Hessian, shape vector) are expressed in pixel units:
//! input pixels per output pixel.

mod derivatives;
mod sampler;
mod spec_file;
mod transform;

pub use derivatives::{
    numeric_hessian_inverse, numeric_jacobian_inverse, shape_vector, Hessian, ShapeVector,
    DEGENERATE_DET,
};
pub use sampler::{
    homography_from_params, sample_homography, HomographyParams, Regime, THETA_STD_DEG,
};
pub use spec_file::TransformSpec;
pub use transform::{ErpView, Transform, TransformKind};

/// Image size in pixels, `h` rows by `w` columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Size {
    pub h: usize,
    pub w: usize,
}

impl Size {
    pub const fn new(h: usize, w: usize) -> Self {
        Self { h, w }
    }

    pub const fn area(&self) -> usize {
        self.h * self.w
    }
}

/// A point in normalized image coordinates. `u` runs along the width, `v`
/// along the height.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NormalizedCoord {
    pub u: f64,
    pub v: f64,
}

impl NormalizedCoord {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Normalized coordinate of the center of pixel `(row, col)`.
    pub fn pixel_center(row: usize, col: usize, size: Size) -> Self {
        Self {
            u: axis_center(col, size.w),
            v: axis_center(row, size.h),
        }
    }

    pub fn to_pixel(self, size: Size) -> [f64; 2] {
        [
            (self.u + 1.0) * 0.5 * size.w as f64,
            (self.v + 1.0) * 0.5 * size.h as f64,
        ]
    }

    pub fn from_pixel(p: [f64; 2], size: Size) -> Self {
        Self {
            u: 2.0 * p[0] / size.w as f64 - 1.0,
            v: 2.0 * p[1] / size.h as f64 - 1.0,
        }
    }

    pub fn in_domain(self) -> bool {
        (-1.0..=1.0).contains(&self.u) && (-1.0..=1.0).contains(&self.v)
    }
}

/// Center of pixel `i` on an `n`-pixel axis, normalized.
pub fn axis_center(i: usize, n: usize) -> f64 {
    -1.0 + (2 * i + 1) as f64 / n as f64
}
