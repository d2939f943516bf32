use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3};

use super::{NormalizedCoord, Size};
use crate::error::{Error, Result};

/// Homogeneous `w` at or below this is treated as the horizon of a homography.
const HORIZON_EPS: f64 = 1e-12;
const SINGULAR_DET: f64 = 1e-12;

/// A pinhole view extracted from an equirectangular panorama.
///
/// Longitude in `[-π, π]` maps linearly onto the panorama width, latitude in
/// `[-π/2, π/2]` onto its height (north at the top). The camera looks along
/// `+z` with `x` right and `y` down; the view ray is pitched about `x` first,
/// then yawed about the vertical axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErpView {
    /// Horizontal field of view in degrees.
    pub fov_deg: f64,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TransformKind {
    /// Axis-aligned magnification: the output is `s_x` times wider and `s_y`
    /// times taller than the input.
    AxisScale { sx: f64, sy: f64 },
    /// Row-major 3×3 matrix taking homogeneous output pixels to input pixels.
    Homography { m: [f64; 9] },
    ErpPerspective(ErpView),
}

impl TransformKind {
    fn name(&self) -> &'static str {
        match self {
            TransformKind::AxisScale { .. } => "axis-scale",
            TransformKind::Homography { .. } => "homography",
            TransformKind::ErpPerspective(_) => "erp-perspective",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Cached {
    None,
    /// Inverse of the homography matrix, i.e. the forward map.
    Forward([f64; 9]),
    Erp { rot: Matrix3<f64>, focal: f64 },
}

/// An invertible planar map between an input image of `in_size` and an output
/// image of `out_size`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transform {
    kind: TransformKind,
    in_size: Size,
    out_size: Size,
    cached: Cached,
}

impl Transform {
    pub fn identity(size: Size) -> Self {
        Self::homography([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], size, size)
            .expect("identity is invertible")
    }

    /// Magnify by `(sx, sy)`; the output size is the rounded product.
    pub fn axis_scale(sx: f64, sy: f64, in_size: Size) -> Result<Self> {
        if !(sx.is_finite() && sy.is_finite() && sx > 0.0 && sy > 0.0) {
            return Err(Error::Singular(format!("axis scale ({sx}, {sy})")));
        }
        let out_size = Size::new(
            ((in_size.h as f64 * sy).round() as usize).max(1),
            ((in_size.w as f64 * sx).round() as usize).max(1),
        );
        Ok(Self {
            kind: TransformKind::AxisScale { sx, sy },
            in_size,
            out_size,
            cached: Cached::None,
        })
    }

    pub fn homography(m: [f64; 9], in_size: Size, out_size: Size) -> Result<Self> {
        let mat = Matrix3::from_row_slice(&m);
        let det = mat.determinant();
        if !det.is_finite() || det.abs() <= SINGULAR_DET {
            return Err(Error::Singular(format!("homography det {det:e}")));
        }
        let inv = mat
            .try_inverse()
            .ok_or_else(|| Error::Singular("homography is not invertible".into()))?;
        let mut fwd = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                fwd[r * 3 + c] = inv[(r, c)];
            }
        }
        Ok(Self {
            kind: TransformKind::Homography { m },
            in_size,
            out_size,
            cached: Cached::Forward(fwd),
        })
    }

    /// Perspective view of `out_size` pixels extracted from a panorama of
    /// `erp_size` pixels.
    pub fn erp_perspective(view: ErpView, out_size: Size, erp_size: Size) -> Result<Self> {
        if !(view.fov_deg > 0.0 && view.fov_deg < 180.0) {
            return Err(Error::InvalidFov(view.fov_deg));
        }
        let focal = 0.5 * out_size.w as f64 / (0.5 * view.fov_deg.to_radians()).tan();
        let (sp, cp) = view.pitch_deg.to_radians().sin_cos();
        let (sy, cy) = view.yaw_deg.to_radians().sin_cos();
        let pitch = Matrix3::new(1.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, sp, cp);
        let yaw = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
        Ok(Self {
            kind: TransformKind::ErpPerspective(view),
            in_size: erp_size,
            out_size,
            cached: Cached::Erp {
                rot: yaw * pitch,
                focal,
            },
        })
    }

    pub fn kind(&self) -> &TransformKind {
        &self.kind
    }

    pub fn in_size(&self) -> Size {
        self.in_size
    }

    pub fn out_size(&self) -> Size {
        self.out_size
    }

    /// The same map with a different output grid size.
    pub fn with_out_size(mut self, out_size: Size) -> Self {
        self.out_size = out_size;
        self
    }

    /// Inverse map in pixel coordinates. `None` where the map is undefined
    /// (beyond a homography's horizon).
    pub fn inverse_px(&self, y: [f64; 2]) -> Option<[f64; 2]> {
        match (&self.kind, &self.cached) {
            (TransformKind::AxisScale { sx, sy }, _) => Some([y[0] / sx, y[1] / sy]),
            (TransformKind::Homography { m }, _) => {
                let w = m[6] * y[0] + m[7] * y[1] + m[8];
                if w <= HORIZON_EPS {
                    return None;
                }
                Some([
                    (m[0] * y[0] + m[1] * y[1] + m[2]) / w,
                    (m[3] * y[0] + m[4] * y[1] + m[5]) / w,
                ])
            }
            (TransformKind::ErpPerspective(_), Cached::Erp { rot, focal }) => {
                let cam = nalgebra::Vector3::new(
                    (y[0] - 0.5 * self.out_size.w as f64) / focal,
                    (y[1] - 0.5 * self.out_size.h as f64) / focal,
                    1.0,
                );
                let d = rot * cam;
                let lon = d.x.atan2(d.z);
                let lat = (-d.y).atan2(d.x.hypot(d.z));
                Some(lon_lat_to_erp_pixel(lon, lat, self.in_size))
            }
            _ => unreachable!("transform cache out of sync with kind"),
        }
    }

    /// Forward map in pixel coordinates.
    pub fn forward_px(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        match (&self.kind, &self.cached) {
            (TransformKind::AxisScale { sx, sy }, _) => Ok([x[0] * sx, x[1] * sy]),
            (TransformKind::Homography { .. }, Cached::Forward(f)) => {
                let w = f[6] * x[0] + f[7] * x[1] + f[8];
                if w.abs() < HORIZON_EPS {
                    return Err(Error::Singular(format!(
                        "homogeneous w = {w:e} at ({}, {})",
                        x[0], x[1]
                    )));
                }
                Ok([
                    (f[0] * x[0] + f[1] * x[1] + f[2]) / w,
                    (f[3] * x[0] + f[4] * x[1] + f[5]) / w,
                ])
            }
            (TransformKind::ErpPerspective(_), Cached::Erp { rot, focal }) => {
                let (lon, lat) = erp_pixel_to_lon_lat(x, self.in_size);
                let world = nalgebra::Vector3::new(
                    lat.cos() * lon.sin(),
                    -lat.sin(),
                    lat.cos() * lon.cos(),
                );
                let cam = rot.transpose() * world;
                if cam.z <= HORIZON_EPS {
                    return Err(Error::BehindView);
                }
                Ok([
                    focal * cam.x / cam.z + 0.5 * self.out_size.w as f64,
                    focal * cam.y / cam.z + 0.5 * self.out_size.h as f64,
                ])
            }
            _ => unreachable!("transform cache out of sync with kind"),
        }
    }

    /// `x = f⁻¹(y)` in normalized coordinates, or `None` when `x` falls outside
    /// the input image (or the map is undefined at `y`).
    pub fn apply_inverse(&self, y: NormalizedCoord) -> Option<NormalizedCoord> {
        let x = self.inverse_px(y.to_pixel(self.out_size))?;
        let x = NormalizedCoord::from_pixel(x, self.in_size);
        x.in_domain().then_some(x)
    }

    /// `y = f(x)` in normalized coordinates.
    pub fn apply_forward(&self, x: NormalizedCoord) -> Result<NormalizedCoord> {
        let y = self.forward_px(x.to_pixel(self.in_size))?;
        Ok(NormalizedCoord::from_pixel(y, self.out_size))
    }

    /// Closed-form Jacobian of the inverse map at `y`, in input pixels per
    /// output pixel. Row `i` holds the derivatives of input component `i`.
    pub fn analytic_jacobian_inverse(&self, y: NormalizedCoord) -> Result<Matrix2<f64>> {
        let yp = y.to_pixel(self.out_size);
        match &self.kind {
            TransformKind::AxisScale { sx, sy } => Ok(Matrix2::new(1.0 / sx, 0.0, 0.0, 1.0 / sy)),
            TransformKind::Homography { m } => {
                let w = m[6] * yp[0] + m[7] * yp[1] + m[8];
                if w.abs() < HORIZON_EPS {
                    return Err(Error::Singular(format!("homogeneous w = {w:e}")));
                }
                let x0 = (m[0] * yp[0] + m[1] * yp[1] + m[2]) / w;
                let x1 = (m[3] * yp[0] + m[4] * yp[1] + m[5]) / w;
                Ok(Matrix2::new(
                    (m[0] - x0 * m[6]) / w,
                    (m[1] - x0 * m[7]) / w,
                    (m[3] - x1 * m[6]) / w,
                    (m[4] - x1 * m[7]) / w,
                ))
            }
            TransformKind::ErpPerspective(_) => Err(Error::NoAnalyticJacobian(self.kind.name())),
        }
    }

    /// The inverse map as a pixel-space homography, when it is one.
    pub fn as_homography(&self) -> Option<[f64; 9]> {
        match self.kind {
            TransformKind::AxisScale { sx, sy } => {
                Some([1.0 / sx, 0.0, 0.0, 0.0, 1.0 / sy, 0.0, 0.0, 0.0, 1.0])
            }
            TransformKind::Homography { m } => Some(m),
            TransformKind::ErpPerspective(_) => None,
        }
    }

    /// Swap the roles of input and output: the result maps input pixels of
    /// `self` to its output pixels.
    pub fn inverted(&self) -> Result<Transform> {
        match (&self.kind, &self.cached) {
            (TransformKind::AxisScale { sx, sy }, _) => Ok(Transform {
                kind: TransformKind::AxisScale {
                    sx: 1.0 / sx,
                    sy: 1.0 / sy,
                },
                in_size: self.out_size,
                out_size: self.in_size,
                cached: Cached::None,
            }),
            (TransformKind::Homography { .. }, Cached::Forward(f)) => {
                Transform::homography(*f, self.out_size, self.in_size)
            }
            _ => Err(Error::Singular(format!(
                "{} transforms have no closed-form inverse transform",
                self.kind.name()
            ))),
        }
    }

    /// Re-express the map against a window of the input image whose top-left
    /// corner sits at pixel `origin = (x, y)` and whose size is `window`.
    pub fn crop_input(&self, origin: [f64; 2], window: Size) -> Result<Transform> {
        let m = self.as_homography().ok_or(Error::Singular(format!(
            "cannot crop the input of a {} transform",
            self.kind.name()
        )))?;
        let shift = Matrix3::new(1.0, 0.0, -origin[0], 0.0, 1.0, -origin[1], 0.0, 0.0, 1.0);
        let moved = shift * Matrix3::from_row_slice(&m);
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = moved[(r, c)];
            }
        }
        Transform::homography(out, window, self.out_size)
    }

    /// Whether the inverse map wraps horizontally (panorama longitude).
    pub(crate) fn wraps_horizontally(&self) -> bool {
        matches!(self.kind, TransformKind::ErpPerspective(_))
    }
}

/// `(longitude, latitude)` in radians of a panorama pixel coordinate.
pub fn erp_pixel_to_lon_lat(p: [f64; 2], erp: Size) -> (f64, f64) {
    let lon = (p[0] / erp.w as f64 - 0.5) * 2.0 * PI;
    let lat = (0.5 - p[1] / erp.h as f64) * PI;
    (lon, lat)
}

pub fn lon_lat_to_erp_pixel(lon: f64, lat: f64, erp: Size) -> [f64; 2] {
    [
        (lon / (2.0 * PI) + 0.5) * erp.w as f64,
        (0.5 - lat / PI) * erp.h as f64,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_homography, Regime};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sz(h: usize, w: usize) -> Size {
        Size::new(h, w)
    }

    #[test]
    fn identity_inverse_is_identity() {
        let t = Transform::identity(sz(32, 48));
        let y = NormalizedCoord::new(0.25, -0.5);
        let x = t.apply_inverse(y).unwrap();
        assert!((x.u - 0.25).abs() < 1e-15 && (x.v + 0.5).abs() < 1e-15);
        let f = t.apply_forward(NormalizedCoord::new(0.1, 0.2)).unwrap();
        assert!((f.u - 0.1).abs() < 1e-15 && (f.v - 0.2).abs() < 1e-15);
    }

    #[test]
    fn axis_scale_fixes_center() {
        let t = Transform::axis_scale(2.0, 2.0, sz(10, 10)).unwrap();
        assert_eq!(t.out_size(), sz(20, 20));
        let x = t.apply_inverse(NormalizedCoord::new(0.0, 0.0)).unwrap();
        assert!(x.u.abs() < 1e-15 && x.v.abs() < 1e-15);
    }

    #[test]
    fn homography_diag_matches_hand_arithmetic() {
        // M = diag(2, 2, 1): input px = 2 * output px. Output 10x10, input 20x20.
        let t = Transform::homography(
            [2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0],
            sz(20, 20),
            sz(10, 10),
        )
        .unwrap();
        // y = (0.3, -0.6) -> px (6.5, 2.0) -> x px (13, 4) -> normalized (0.3, -0.6)
        let y = NormalizedCoord::new(0.3, -0.6);
        let x = t.apply_inverse(y).unwrap();
        assert!((x.u - (2.0 * 13.0 / 20.0 - 1.0)).abs() < 1e-14);
        assert!((x.v - (2.0 * 4.0 / 20.0 - 1.0)).abs() < 1e-14);

        // Projective row: M = [[1,0,0],[0,1,0],[0.01,0,1]], y px = (4, 6) -> w = 1.04.
        let t = Transform::homography(
            [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.01, 0.0, 1.0],
            sz(10, 10),
            sz(10, 10),
        )
        .unwrap();
        let x = t.inverse_px([4.0, 6.0]).unwrap();
        assert!((x[0] - 4.0 / 1.04).abs() < 1e-14);
        assert!((x[1] - 6.0 / 1.04).abs() < 1e-14);
    }

    #[test]
    fn rotation_by_quarter_turn() {
        // Rotation about the image center of a square image, expressed on
        // centered pixel coordinates: forward maps +u to +v.
        let n = 16.0;
        let c = n / 2.0;
        // inverse map x = R(-90°)(y - c) + c: (a, b) -> (b, -a)
        let m = [0.0, 1.0, -c + c, -1.0, 0.0, c + c, 0.0, 0.0, 1.0];
        let t = Transform::homography(m, sz(16, 16), sz(16, 16)).unwrap();
        let y = t.apply_forward(NormalizedCoord::new(1.0, 0.0)).unwrap();
        assert!(y.u.abs() < 1e-12 && (y.v - 1.0).abs() < 1e-12, "{y:?}");
    }

    #[test]
    fn round_trip_in_scale_homographies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let t = sample_homography(&mut rng, Regime::InScale, sz(64, 64));
            let x = NormalizedCoord::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let y = t.apply_forward(x).unwrap();
            let back = t.inverse_px(y.to_pixel(t.out_size())).unwrap();
            let back = NormalizedCoord::from_pixel(back, t.in_size());
            worst = worst.max((back.u - x.u).abs()).max((back.v - x.v).abs());
        }
        assert!(worst < 1e-6, "worst round-trip error {worst:e}");
    }

    #[test]
    fn analytic_jacobian_of_axis_scale() {
        let t = Transform::axis_scale(2.0, 4.0, sz(8, 8)).unwrap();
        let j = t.analytic_jacobian_inverse(NormalizedCoord::default()).unwrap();
        assert_eq!(j, Matrix2::new(0.5, 0.0, 0.0, 0.25));
        let j = Transform::identity(sz(8, 8))
            .analytic_jacobian_inverse(NormalizedCoord::new(0.3, 0.1))
            .unwrap();
        assert_eq!(j, Matrix2::identity());
    }

    #[test]
    fn singular_homography_rejected() {
        let err = Transform::homography([1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 1.0], sz(4, 4), sz(4, 4));
        assert!(matches!(err, Err(Error::Singular(_))));
    }

    #[test]
    fn erp_optical_axis_hits_panorama_center() {
        let view = ErpView { fov_deg: 90.0, yaw_deg: 0.0, pitch_deg: 0.0 };
        let t = Transform::erp_perspective(view, sz(64, 64), sz(128, 256)).unwrap();
        let x = t.apply_inverse(NormalizedCoord::new(0.0, 0.0)).unwrap();
        assert!(x.u.abs() < 1e-12 && x.v.abs() < 1e-12);
        let (lon, lat) = erp_pixel_to_lon_lat(x.to_pixel(t.in_size()), t.in_size());
        assert!(lon.abs() < 1e-12 && lat.abs() < 1e-12);
    }

    #[test]
    fn erp_corner_ray_matches_spherical_trig() {
        let view = ErpView { fov_deg: 90.0, yaw_deg: 0.0, pitch_deg: 0.0 };
        let t = Transform::erp_perspective(view, sz(64, 64), sz(512, 1024)).unwrap();
        // Top-right image corner: camera ray (1, -1, 1) at fov 90.
        let x = t.inverse_px([64.0, 0.0]).unwrap();
        let (lon, lat) = erp_pixel_to_lon_lat(x, t.in_size());
        let want_lon = 1.0f64.atan2(1.0);
        let want_lat = (1.0 / 2f64.sqrt()).atan();
        assert!((lon - want_lon).abs() < 1e-6, "{lon} vs {want_lon}");
        assert!((lat - want_lat).abs() < 1e-6, "{lat} vs {want_lat}");
    }

    #[test]
    fn erp_yaw_and_pitch_move_the_view_center() {
        let view = ErpView { fov_deg: 120.0, yaw_deg: 30.0, pitch_deg: 20.0 };
        let t = Transform::erp_perspective(view, sz(832, 832), sz(832, 1664)).unwrap();
        let x = t.inverse_px([416.0, 416.0]).unwrap();
        let (lon, lat) = erp_pixel_to_lon_lat(x, t.in_size());
        assert!((lon - 30f64.to_radians()).abs() < 1e-12);
        assert!((lat - 20f64.to_radians()).abs() < 1e-12);
        let y = t.forward_px(x).unwrap();
        assert!((y[0] - 416.0).abs() < 1e-8 && (y[1] - 416.0).abs() < 1e-8);
    }

    #[test]
    fn erp_round_trip_and_behind_camera() {
        let view = ErpView { fov_deg: 120.0, yaw_deg: -40.0, pitch_deg: 10.0 };
        let t = Transform::erp_perspective(view, sz(100, 120), sz(200, 400)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let y = NormalizedCoord::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let x = t.apply_inverse(y).unwrap();
            let back = t.apply_forward(x).unwrap();
            assert!((back.u - y.u).abs() < 1e-6 && (back.v - y.v).abs() < 1e-6);
        }
        // The point opposite the view direction is behind the camera.
        let behind = lon_lat_to_erp_pixel((-40f64 + 180.0).to_radians(), -10f64.to_radians(), t.in_size());
        assert!(matches!(t.forward_px(behind), Err(Error::BehindView)));
    }

    #[test]
    fn erp_rejects_bad_fov() {
        for fov in [0.0, 180.0, -5.0, 200.0] {
            let view = ErpView { fov_deg: fov, yaw_deg: 0.0, pitch_deg: 0.0 };
            assert!(matches!(
                Transform::erp_perspective(view, sz(8, 8), sz(8, 16)),
                Err(Error::InvalidFov(_))
            ));
        }
        let view = ErpView { fov_deg: 90.0, yaw_deg: 0.0, pitch_deg: 0.0 };
        let t = Transform::erp_perspective(view, sz(8, 8), sz(8, 16)).unwrap();
        assert!(matches!(
            t.analytic_jacobian_inverse(NormalizedCoord::default()),
            Err(Error::NoAnalyticJacobian(_))
        ));
    }

    #[test]
    fn inverted_and_cropped_maps_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = sample_homography(&mut rng, Regime::InScale, sz(40, 40));
        let inv = t.inverted().unwrap();
        let x = [10.3, 7.7];
        let y = t.forward_px(x).unwrap();
        let y2 = inv.inverse_px(x).unwrap();
        assert!((y[0] - y2[0]).abs() < 1e-9 && (y[1] - y2[1]).abs() < 1e-9);

        let c = t.crop_input([3.0, 2.0], sz(8, 8)).unwrap();
        let a = t.inverse_px([5.5, 6.5]).unwrap();
        let b = c.inverse_px([5.5, 6.5]).unwrap();
        assert!((a[0] - 3.0 - b[0]).abs() < 1e-9 && (a[1] - 2.0 - b[1]).abs() < 1e-9);
    }
}
