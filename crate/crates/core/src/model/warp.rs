use rayon::prelude::*;

use super::{FourierField, LtewNet, Query};
use crate::baselines::{sample, Kernel1D};
use crate::error::{Error, Result};
use crate::geometry::{shape_vector, NormalizedCoord, ShapeVector, Transform};
use crate::nn::Scalar;
use crate::raster::ImageBuffer;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpOptions {
    /// Raise the magnitude of the diagonal Jacobian entries of every shape
    /// vector to at least `s_tr` before phase estimation.
    pub clamp_shape: bool,
    /// Smallest per-axis input-pixels-per-output-pixel ratio seen in training.
    pub s_tr: f64,
    /// Queries evaluated per batch.
    pub chunk: usize,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for WarpOptions {
    fn default() -> Self {
        Self {
            clamp_shape: false,
            s_tr: 0.25,
            chunk: 4096,
            workers: None,
        }
    }
}

/// Bilinear sample of `img` at `f⁻¹(y)`, or `None` outside the domain.
pub fn bilinear_skip(img: &ImageBuffer, t: &Transform, y: NormalizedCoord) -> Option<[f64; 3]> {
    t.apply_inverse(y).map(|x| sample(img, x, Kernel1D::Bilinear))
}

fn clamp_shape(mut s: ShapeVector, s_tr: f64) -> ShapeVector {
    for i in [0, 3] {
        let v = s.jac[i];
        if v.abs() < s_tr {
            s.jac[i] = if v < 0.0 { -s_tr } else { s_tr };
        }
    }
    s
}

impl<T: Scalar> LtewNet<T> {
    /// Query for output pixel `y`, or `None` when it maps outside the input
    /// or its shape is undefined.
    pub fn make_query(&self, t: &Transform, y: NormalizedCoord) -> Option<Query> {
        let x = t.apply_inverse(y)?;
        let shape = shape_vector(t, y).ok().filter(ShapeVector::is_finite)?;
        Some(Query { x, shape })
    }

    /// Ensemble residual for one output point.
    pub fn local_ensemble_query(
        &self,
        fourier: &FourierField<T>,
        t: &Transform,
        y: NormalizedCoord,
    ) -> Result<Option<[T; 3]>> {
        match self.make_query(t, y) {
            Some(q) => Ok(Some(self.query_residuals(fourier, &[q])?[0])),
            None => Ok(None),
        }
    }

    /// Resample `img` onto the output grid of `t`. Valid pixels are clipped to
    /// `[0, 1]`; invalid ones are zero and masked.
    pub fn warp_image(&self, img: &ImageBuffer, t: &Transform, opts: &WarpOptions) -> Result<ImageBuffer> {
        if img.size() != t.in_size() {
            return Err(Error::Shape {
                op: "warp_image",
                detail: format!("image is {:?}, transform expects {:?}", img.size(), t.in_size()),
            });
        }
        let fourier = self.estimate_fourier(&self.encode(img)?)?;
        let out_size = t.out_size();
        let chunk = opts.chunk.max(1);
        let starts: Vec<usize> = (0..out_size.area()).step_by(chunk).collect();
        let run = |start: &usize| -> Result<Vec<Option<[f32; 3]>>> {
            let end = start.saturating_add(chunk).min(out_size.area());
            self.warp_chunk(img, t, &fourier, *start..end, opts)
        };
        let parts: Vec<Result<Vec<Option<[f32; 3]>>>> = match opts.workers {
            Some(1) => starts.iter().map(run).collect(),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?
                .install(|| starts.par_iter().map(run).collect()),
            None => starts.par_iter().map(run).collect(),
        };

        let mut out = ImageBuffer::new(out_size);
        let mut mask = vec![false; out_size.area()];
        let mut i = 0;
        for part in parts {
            for px in part? {
                if let Some(rgb) = px {
                    out.set(i / out_size.w, i % out_size.w, rgb);
                    mask[i] = true;
                }
                i += 1;
            }
        }
        out.set_mask(mask)?;
        Ok(out)
    }

    fn warp_chunk(
        &self,
        img: &ImageBuffer,
        t: &Transform,
        fourier: &FourierField<T>,
        pixels: std::ops::Range<usize>,
        opts: &WarpOptions,
    ) -> Result<Vec<Option<[f32; 3]>>> {
        let out_size = t.out_size();
        let mut queries = Vec::with_capacity(pixels.len());
        let mut slots = Vec::with_capacity(pixels.len());
        for i in pixels {
            let y = NormalizedCoord::pixel_center(i / out_size.w, i % out_size.w, out_size);
            match self.make_query(t, y) {
                Some(mut q) => {
                    if opts.clamp_shape {
                        q.shape = clamp_shape(q.shape, opts.s_tr);
                    }
                    slots.push(Some(queries.len()));
                    queries.push(q);
                }
                None => slots.push(None),
            }
        }
        let residuals = self.query_residuals(fourier, &queries)?;
        Ok(slots
            .into_iter()
            .map(|slot| {
                slot.map(|k| {
                    let skip = sample(img, queries[k].x, Kernel1D::Bilinear);
                    let r = residuals[k];
                    std::array::from_fn(|c| {
                        let v = (T::lit(skip[c] as f32 as f64) + r[c]).to_f64_lossy();
                        v.clamp(0.0, 1.0) as f32
                    })
                })
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::classical_warp;
    use crate::data::synthetic_image;
    use crate::geometry::{sample_homography, Regime, Size};
    use crate::model::LtewConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> LtewNet<f32> {
        LtewNet::init(LtewConfig::tiny(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn zero_residual_reduces_to_bilinear() {
        let mut n = net(0);
        n.weights_mut().get_mut("decoder.layer3.w").unwrap().fill(0.0);
        n.weights_mut().get_mut("decoder.layer3.b").unwrap().fill(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = sample_homography(&mut rng, Regime::InScale, Size::new(30, 30));
        let img = synthetic_image(1, t.in_size());
        let got = n.warp_image(&img, &t, &WarpOptions::default()).unwrap();
        let want = classical_warp(&img, &t, Kernel1D::Bilinear);
        for (i, (a, b)) in got.data().iter().zip(want.data()).enumerate() {
            if got.mask()[i / 3] {
                assert_eq!(a, b);
            }
        }
        assert!(got.valid_count() > 0 && got.valid_count() <= want.valid_count());
    }

    #[test]
    fn identity_is_fully_valid_and_clipped() {
        let n = net(1);
        let img = synthetic_image(2, Size::new(12, 10));
        let out = n.warp_image(&img, &Transform::identity(img.size()), &WarpOptions::default()).unwrap();
        assert_eq!(out.valid_count(), 120);
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn chunking_and_workers_do_not_change_output() {
        let n = net(2);
        let img = synthetic_image(3, Size::new(16, 16));
        let t = Transform::axis_scale(1.7, 2.3, img.size()).unwrap();
        let base = n.warp_image(&img, &t, &WarpOptions { chunk: usize::MAX, workers: Some(1), ..Default::default() }).unwrap();
        for (chunk, workers) in [(1, Some(1)), (7, Some(3)), (100, None), (1024, Some(2))] {
            let out = n.warp_image(&img, &t, &WarpOptions { chunk, workers, ..Default::default() }).unwrap();
            assert_eq!(out, base, "chunk {chunk} workers {workers:?}");
        }
    }

    #[test]
    fn clamp_raises_small_diagonal_entries() {
        let s = ShapeVector {
            jac: [0.1, 0.05, -0.02, -0.3],
            hess: [0.01; 6],
        };
        let c = clamp_shape(s, 0.25);
        assert_eq!(c.jac, [0.25, 0.05, -0.02, -0.3]);
        assert_eq!(c.hess, s.hess);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let n = net(3);
        let img = ImageBuffer::new(Size::new(4, 4));
        let t = Transform::identity(Size::new(5, 4));
        assert!(n.warp_image(&img, &t, &WarpOptions::default()).is_err());
    }
}
