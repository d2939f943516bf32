//! 3×3 convolution, stride 1, zero padding 1, lowered to GEMM via im2col.

use super::{Scalar, Tensor};
use crate::error::{shape_err, Result};

pub struct ConvGrads<T> {
    pub dx: Tensor<T>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

fn check(x: &Tensor<impl Scalar>, w: &Tensor<impl Scalar>) -> Result<(usize, usize, usize, usize, usize)> {
    if x.shape().len() != 4 {
        return Err(shape_err("conv3x3", format!("input must be NCHW, got {:?}", x.shape())));
    }
    let (n, c, h, wd) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    if w.shape().len() != 4 || w.dim(1) != c || w.dim(2) != 3 || w.dim(3) != 3 {
        return Err(shape_err(
            "conv3x3",
            format!("weight {:?} does not match input channels {c}", w.shape()),
        ));
    }
    Ok((n, c, h, wd, w.dim(0)))
}

/// Unfold one `c × h × w` image into a `(c·9) × (h·w)` patch matrix.
fn im2col<T: Scalar>(img: &[T], c: usize, h: usize, w: usize, col: &mut [T]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &img[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                for i in 0..h {
                    let si = i as isize + ky as isize - 1;
                    let dst = &mut row[i * w..(i + 1) * w];
                    if si < 0 || si >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[si as usize * w..(si as usize + 1) * w];
                    for (j, d) in dst.iter_mut().enumerate() {
                        let sj = j as isize + kx as isize - 1;
                        *d = if sj < 0 || sj >= w as isize {
                            T::zero()
                        } else {
                            src[sj as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Fold a patch-matrix gradient back onto the image it was unfolded from.
fn col2im<T: Scalar>(col: &[T], c: usize, h: usize, w: usize, img: &mut [T]) {
    let hw = h * w;
    img.fill(T::zero());
    for ci in 0..c {
        let plane = &mut img[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                for i in 0..h {
                    let si = i as isize + ky as isize - 1;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[si as usize * w..(si as usize + 1) * w];
                    for j in 0..w {
                        let sj = j as isize + kx as isize - 1;
                        if sj >= 0 && sj < w as isize {
                            dst[sj as usize] += row[i * w + j];
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `x` (N×C×H×W) with `w` (O×C×3×3) plus bias `b` (O).
pub fn conv3x3<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, wd, o) = check(x, w)?;
    if b.len() != o {
        return Err(shape_err("conv3x3", format!("bias has {} entries, need {o}", b.len())));
    }
    let hw = h * wd;
    let mut out = Tensor::zeros(&[n, o, h, wd]);
    let mut col = vec![T::zero(); c * 9 * hw];
    for ni in 0..n {
        im2col(&x.data()[ni * c * hw..(ni + 1) * c * hw], c, h, wd, &mut col);
        let dst = &mut out.data_mut()[ni * o * hw..(ni + 1) * o * hw];
        for (oi, plane) in dst.chunks_mut(hw.max(1)).enumerate().take(o) {
            plane.fill(b.data()[oi]);
        }
        T::gemm(o, c * 9, hw, w.data(), false, &col, false, dst, true);
    }
    Ok(out)
}

/// Gradients of [`conv3x3`] given the upstream gradient of its output.
pub fn conv3x3_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (n, c, h, wd, o) = check(x, w)?;
    if upstream.shape() != [n, o, h, wd] {
        return Err(shape_err(
            "conv3x3_backward",
            format!("upstream {:?}, expected {:?}", upstream.shape(), [n, o, h, wd]),
        ));
    }
    let hw = h * wd;
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[o]);
    let mut col = vec![T::zero(); c * 9 * hw];
    let mut dcol = vec![T::zero(); c * 9 * hw];
    for ni in 0..n {
        let dy = &upstream.data()[ni * o * hw..(ni + 1) * o * hw];
        for (oi, plane) in dy.chunks(hw.max(1)).enumerate().take(o) {
            db.data_mut()[oi] += plane.iter().copied().sum::<T>();
        }
        im2col(&x.data()[ni * c * hw..(ni + 1) * c * hw], c, h, wd, &mut col);
        T::gemm(o, hw, c * 9, dy, false, &col, true, dw.data_mut(), true);
        T::gemm(c * 9, o, hw, w.data(), true, dy, false, &mut dcol, false);
        col2im(&dcol, c, h, wd, &mut dx.data_mut()[ni * c * hw..(ni + 1) * c * hw]);
    }
    Ok(ConvGrads { dx, dw, db })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct nested-loop cross-correlation.
    fn direct(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
        let (n, c, h, wd) = (x.dim(0), x.dim(1), x.dim(2), x.dim(3));
        let o = w.dim(0);
        Tensor::from_fn(&[n, o, h, wd], |idx| {
            let j = idx % wd;
            let i = (idx / wd) % h;
            let oi = (idx / (wd * h)) % o;
            let ni = idx / (wd * h * o);
            let mut acc = b.data()[oi];
            for ci in 0..c {
                for ky in 0..3 {
                    for kx in 0..3 {
                        let (si, sj) = (i as isize + ky - 1, j as isize + kx - 1);
                        if si >= 0 && sj >= 0 && (si as usize) < h && (sj as usize) < wd {
                            acc += w.data()[((oi * c + ci) * 3 + ky as usize) * 3 + kx as usize]
                                * x.data()[((ni * c + ci) * h + si as usize) * wd + sj as usize];
                        }
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::<f64>::uniform(&[2, 3, 5, 4], 1.0, &mut rng);
        let mut w = Tensor::zeros(&[3, 3, 3, 3]);
        for c in 0..3 {
            w.data_mut()[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0;
        }
        let y = conv3x3(&x, &w, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_sums_neighborhood() {
        let x = Tensor::from_fn(&[1, 1, 5, 5], |_| 1.0f32);
        let w = Tensor::from_fn(&[1, 1, 3, 3], |_| 1.0f32);
        let y = conv3x3(&x, &w, &Tensor::zeros(&[1])).unwrap();
        for i in 1..4 {
            for j in 1..4 {
                assert_eq!(y.data()[i * 5 + j], 9.0);
            }
        }
        assert_eq!(y.data()[0], 4.0);
        assert_eq!(y.data()[2], 6.0);
    }

    #[test]
    fn matches_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::uniform(&[2, 3, 6, 7], 1.0, &mut rng);
        let w = Tensor::uniform(&[4, 3, 3, 3], 1.0, &mut rng);
        let b = Tensor::uniform(&[4], 1.0, &mut rng);
        let got = conv3x3(&x, &w, &b).unwrap();
        let want = direct(&x, &w, &b);
        for (a, b) in got.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let x = Tensor::<f32>::zeros(&[1, 3, 4, 4]);
        let w = Tensor::zeros(&[2, 4, 3, 3]);
        assert!(conv3x3(&x, &w, &Tensor::zeros(&[2])).is_err());
        let w = Tensor::zeros(&[2, 3, 3, 3]);
        assert!(conv3x3(&x, &w, &Tensor::zeros(&[3])).is_err());
        assert!(conv3x3_backward(&x, &w, &Tensor::zeros(&[1, 2, 4, 5])).is_err());
    }

    #[test]
    fn one_pixel_image() {
        let x = Tensor::from_fn(&[1, 2, 1, 1], |i| i as f32 + 1.0);
        let w = Tensor::from_fn(&[1, 2, 3, 3], |_| 1.0f32);
        let y = conv3x3(&x, &w, &Tensor::from_fn(&[1], |_| 0.5)).unwrap();
        assert_eq!(y.data(), &[3.5]);
    }
}
