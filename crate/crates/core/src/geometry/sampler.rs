//! Random homographies for training and evaluation.
//!
//! The inverse map is composed as shear · rotation · scale · projection, the
//! projection factor carrying the translation and the perspective row. The
//! composition acts on output pixel coordinates measured from the image
//! center. Projection coefficients are drawn relative to the output width and
//! height, so `p_x · y` stays O(1) across the image.

use nalgebra::Matrix3;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::{Size, Transform};

/// Standard deviation of the rotation angle, in degrees.
pub const THETA_STD_DEG: f64 = 0.15;

const SHEAR: (f64, f64) = (-0.25, 0.25);
const IN_SCALE: (f64, f64) = (0.35, 0.5);
const OUT_OF_SCALE: (f64, f64) = (0.125, 0.25);
/// Translation range as a fraction of the output width / height.
const TRANSLATION: (f64, f64) = (-0.75, 0.125);
/// Projection range; divided by the output width / height.
const PROJECTION: (f64, f64) = (-0.6, 0.6);
/// Smallest homogeneous `w` tolerated over the output image.
const MIN_W: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Scales seen during training.
    InScale,
    /// Stronger magnification, outside the training range.
    OutOfScale,
}

impl Regime {
    pub fn scale_range(self) -> (f64, f64) {
        match self {
            Regime::InScale => IN_SCALE,
            Regime::OutOfScale => OUT_OF_SCALE,
        }
    }
}

/// Parameters of one sampled inverse map. Translations are in output pixels,
/// projection coefficients in inverse output pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomographyParams {
    pub hx: f64,
    pub hy: f64,
    pub theta_deg: f64,
    pub sx: f64,
    pub sy: f64,
    pub tx: f64,
    pub ty: f64,
    pub px: f64,
    pub py: f64,
}

impl HomographyParams {
    pub const IDENTITY: HomographyParams = HomographyParams {
        hx: 0.0,
        hy: 0.0,
        theta_deg: 0.0,
        sx: 1.0,
        sy: 1.0,
        tx: 0.0,
        ty: 0.0,
        px: 0.0,
        py: 0.0,
    };

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, regime: Regime, out_size: Size) -> Self {
        let (w, h) = (out_size.w as f64, out_size.h as f64);
        let shear = Uniform::new(SHEAR.0, SHEAR.1).expect("valid range");
        let (lo, hi) = regime.scale_range();
        let scale = Uniform::new(lo, hi).expect("valid range");
        let theta = Normal::new(0.0, THETA_STD_DEG).expect("valid std");
        let trans = Uniform::new(TRANSLATION.0, TRANSLATION.1).expect("valid range");
        let proj = Uniform::new(PROJECTION.0, PROJECTION.1).expect("valid range");
        HomographyParams {
            hx: shear.sample(rng),
            hy: shear.sample(rng),
            theta_deg: theta.sample(rng),
            sx: scale.sample(rng),
            sy: scale.sample(rng),
            tx: trans.sample(rng) * w,
            ty: trans.sample(rng) * h,
            px: proj.sample(rng) / w,
            py: proj.sample(rng) / h,
        }
    }
}

/// Compose the pixel-space inverse-map matrix for `params` over an output
/// image of `out_size`. The resulting input coordinates have an arbitrary
/// origin.
pub fn homography_from_params(params: &HomographyParams, out_size: Size) -> [f64; 9] {
    let p = params;
    let (s, c) = p.theta_deg.to_radians().sin_cos();
    let shear = Matrix3::new(1.0, p.hx, 0.0, p.hy, 1.0, 0.0, 0.0, 0.0, 1.0);
    let rot = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
    let scale = Matrix3::new(p.sx, 0.0, 0.0, 0.0, p.sy, 0.0, 0.0, 0.0, 1.0);
    let proj = Matrix3::new(1.0, 0.0, p.tx, 0.0, 1.0, p.ty, p.px, p.py, 1.0);
    let center = Matrix3::new(
        1.0,
        0.0,
        -0.5 * out_size.w as f64,
        0.0,
        1.0,
        -0.5 * out_size.h as f64,
        0.0,
        0.0,
        1.0,
    );
    to_row_major(&(shear * rot * scale * proj * center))
}

/// Draw a random inverse map onto an output grid of `out_size`. The input
/// grid is the bounding box of the warped output domain.
pub fn sample_homography<R: Rng + ?Sized>(rng: &mut R, regime: Regime, out_size: Size) -> Transform {
    loop {
        let params = HomographyParams::sample(rng, regime, out_size);
        if let Some(t) = fit_input_canvas(homography_from_params(&params, out_size), out_size) {
            return t;
        }
    }
}

/// Shift `m` so the image of the output rectangle starts at the input origin
/// and size the input grid to its bounding box.
pub(crate) fn fit_input_canvas(m: [f64; 9], out_size: Size) -> Option<Transform> {
    let mat = Matrix3::from_row_slice(&m);
    if mat.determinant().abs() < 1e-12 {
        return None;
    }
    let (w, h) = (out_size.w as f64, out_size.h as f64);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (cx, cy) in [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)] {
        let q = mat * nalgebra::Vector3::new(cx, cy, 1.0);
        if q.z < MIN_W {
            return None;
        }
        for k in 0..2 {
            lo[k] = lo[k].min(q[k] / q.z);
            hi[k] = hi[k].max(q[k] / q.z);
        }
    }
    let in_size = Size::new(
        ((hi[1] - lo[1]).ceil() as usize).max(1),
        ((hi[0] - lo[0]).ceil() as usize).max(1),
    );
    let shift = Matrix3::new(1.0, 0.0, -lo[0], 0.0, 1.0, -lo[1], 0.0, 0.0, 1.0);
    Transform::homography(to_row_major(&(shift * mat)), in_size, out_size).ok()
}

fn to_row_major(m: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[r * 3 + c] = m[(r, c)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TransformKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_params_give_identity_linear_part() {
        let m = homography_from_params(&HomographyParams::IDENTITY, Size::new(10, 20));
        // Only the centering shift remains.
        assert_eq!(m, [1.0, 0.0, -10.0, 0.0, 1.0, -5.0, 0.0, 0.0, 1.0]);
        let t = fit_input_canvas(m, Size::new(10, 20)).unwrap();
        assert_eq!(t.in_size(), Size::new(10, 20));
        let x = t.inverse_px([3.5, 7.25]).unwrap();
        assert!((x[0] - 3.5).abs() < 1e-12 && (x[1] - 7.25).abs() < 1e-12);
    }

    #[test]
    fn sampled_scales_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = Size::new(96, 128);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..10_000 {
            let p = HomographyParams::sample(&mut rng, Regime::InScale, out);
            lo = lo.min(p.sx).min(p.sy);
            hi = hi.max(p.sx).max(p.sy);
            assert!((-0.25..0.25).contains(&p.hx) && (-0.25..0.25).contains(&p.hy));
            assert!((-0.75 * 128.0..0.125 * 128.0).contains(&p.tx));
            assert!((-0.6 / 96.0..0.6 / 96.0).contains(&p.py));
        }
        assert!(lo >= 0.35 && hi <= 0.5, "{lo} {hi}");
        assert!(lo < 0.36 && hi > 0.49);

        for _ in 0..1000 {
            let p = HomographyParams::sample(&mut rng, Regime::OutOfScale, out);
            assert!((0.125..0.25).contains(&p.sx) && (0.125..0.25).contains(&p.sy));
        }
    }

    #[test]
    fn sampled_homography_covers_its_canvas() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let t = sample_homography(&mut rng, Regime::InScale, Size::new(48, 64));
            let (h, w) = (t.in_size().h as f64, t.in_size().w as f64);
            for (cx, cy) in [(0.0, 0.0), (64.0, 0.0), (0.0, 48.0), (64.0, 48.0)] {
                let x = t.inverse_px([cx, cy]).unwrap();
                assert!(x[0] >= -1e-9 && x[0] <= w + 1e-9);
                assert!(x[1] >= -1e-9 && x[1] <= h + 1e-9);
            }
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = sample_homography(&mut ChaCha8Rng::seed_from_u64(1234), Regime::InScale, Size::new(64, 64));
        let b = sample_homography(&mut ChaCha8Rng::seed_from_u64(1234), Regime::InScale, Size::new(64, 64));
        assert_eq!(a, b);
        let TransformKind::Homography { m } = a.kind() else {
            panic!("expected a homography");
        };
        let golden = GOLDEN_SEED_1234;
        for (x, g) in m.iter().zip(golden) {
            assert!((x - g).abs() <= 1e-12 * g.abs().max(1.0), "{m:?}");
        }
        assert_eq!(a.in_size(), GOLDEN_SIZE_1234, "{:?}", a.in_size());
    }

    const GOLDEN_SEED_1234: [f64; 9] = [
        0.24344083830615143,
        0.17416993265048208,
        0.0,
        -0.10600518590217418,
        0.6309680483119666,
        6.784331897739147,
        -0.0063101918048493,
        0.007983138744817172,
        0.9464656979210281,
    ];
    const GOLDEN_SIZE_1234: Size = Size::new(39, 29);
}
