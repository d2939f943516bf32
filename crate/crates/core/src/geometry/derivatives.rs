//! Finite-difference derivatives of the inverse map over the 3×3 stencil of
//! output pixels around a query.

use nalgebra::Matrix2;

use super::{NormalizedCoord, Transform};
use crate::error::{Error, Result};

/// Queries whose inverse-map Jacobian determinant falls below this are
/// treated as degenerate (horizons, panorama poles).
pub const DEGENERATE_DET: f64 = 1e-8;

/// Symmetric second derivatives of the inverse map, folded to six entries
/// ordered `(111, 112, 122, 211, 212, 222)`, where `ijk` is
/// `∂²x_i / ∂y_j ∂y_k`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Hessian(pub [f64; 6]);

impl Hessian {
    /// Unfold into the full `[i][j][k]` tensor.
    pub fn tensor(&self) -> [[[f64; 2]; 2]; 2] {
        let h = &self.0;
        [
            [[h[0], h[1]], [h[1], h[2]]],
            [[h[3], h[4]], [h[4], h[5]]],
        ]
    }
}

/// Per-query pixel-shape descriptor: flattened Jacobian (row-major) followed
/// by the folded Hessian.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ShapeVector {
    pub jac: [f64; 4],
    pub hess: [f64; 6],
}

impl ShapeVector {
    pub const LEN: usize = 10;

    pub fn to_array(&self) -> [f64; 10] {
        let mut out = [0.0; 10];
        out[..4].copy_from_slice(&self.jac);
        out[4..].copy_from_slice(&self.hess);
        out
    }

    pub fn jacobian(&self) -> Matrix2<f64> {
        Matrix2::new(self.jac[0], self.jac[1], self.jac[2], self.jac[3])
    }

    pub fn is_finite(&self) -> bool {
        self.jac.iter().chain(&self.hess).all(|v| v.is_finite())
    }
}

/// Inverse-map offsets `f⁻¹(y + (m, n)) − f⁻¹(y)` for `m, n ∈ {-1, 0, 1}`,
/// in input pixels, indexed `[n + 1][m + 1]`.
struct Stencil([[[f64; 2]; 3]; 3]);

impl Stencil {
    fn sample(t: &Transform, y: NormalizedCoord) -> Result<Self> {
        let yp = y.to_pixel(t.out_size());
        let eval = |dm: f64, dn: f64| {
            t.inverse_px([yp[0] + dm, yp[1] + dn])
                .filter(|p| p[0].is_finite() && p[1].is_finite())
                .ok_or(Error::StencilOutOfDomain {
                    u: y.u + 2.0 * dm / t.out_size().w as f64,
                    v: y.v + 2.0 * dn / t.out_size().h as f64,
                })
        };
        let center = eval(0.0, 0.0)?;
        let period = t.in_size().w as f64;
        let wrap = t.wraps_horizontally();
        let mut d = [[[0.0; 2]; 3]; 3];
        for (row, n) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
            for (col, m) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
                if row == 1 && col == 1 {
                    continue;
                }
                let p = eval(m, n)?;
                let mut du = p[0] - center[0];
                if wrap {
                    du -= period * (du / period).round();
                }
                d[row][col] = [du, p[1] - center[1]];
            }
        }
        Ok(Stencil(d))
    }

    fn at(&self, m: i32, n: i32) -> [f64; 2] {
        self.0[(n + 1) as usize][(m + 1) as usize]
    }

    fn jacobian(&self) -> Matrix2<f64> {
        let mut j = Matrix2::zeros();
        for i in 0..2 {
            j[(i, 0)] = 0.5 * (self.at(1, 0)[i] - self.at(-1, 0)[i]);
            j[(i, 1)] = 0.5 * (self.at(0, 1)[i] - self.at(0, -1)[i]);
        }
        j
    }

    fn hessian(&self) -> Hessian {
        let mut h = [0.0; 6];
        for i in 0..2 {
            let d11 = self.at(1, 0)[i] + self.at(-1, 0)[i];
            let d22 = self.at(0, 1)[i] + self.at(0, -1)[i];
            let d12 = 0.25
                * (self.at(1, 1)[i] - self.at(1, -1)[i] - self.at(-1, 1)[i]
                    + self.at(-1, -1)[i]);
            h[3 * i] = d11;
            h[3 * i + 1] = d12;
            h[3 * i + 2] = d22;
        }
        Hessian(h)
    }
}

/// Central-difference Jacobian of `f⁻¹` at `y`, one output pixel per step.
pub fn numeric_jacobian_inverse(t: &Transform, y: NormalizedCoord) -> Result<Matrix2<f64>> {
    Ok(Stencil::sample(t, y)?.jacobian())
}

/// Second central differences of `f⁻¹` at `y`; the mixed partial is computed
/// once.
pub fn numeric_hessian_inverse(t: &Transform, y: NormalizedCoord) -> Result<Hessian> {
    Ok(Stencil::sample(t, y)?.hessian())
}

/// Shape descriptor of the output pixel at `y`. Fails when the stencil leaves
/// the domain of the map or the Jacobian is degenerate.
pub fn shape_vector(t: &Transform, y: NormalizedCoord) -> Result<ShapeVector> {
    let stencil = Stencil::sample(t, y)?;
    let j = stencil.jacobian();
    let det = j.determinant();
    if !(det.abs() >= DEGENERATE_DET) {
        return Err(Error::DegenerateJacobian(det));
    }
    Ok(ShapeVector {
        jac: [j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]],
        hess: stencil.hessian().0,
    })
}
