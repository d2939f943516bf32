//! Training pairs: degrade a GT image through a transform, cut a void-free
//! input crop, and pick queries whose preimages fall inside it.

use rand::seq::index;
use rand::Rng;

use super::{GtPolicy, TrainConfig, TrainRegime};
use crate::baselines::{classical_warp, sample, Kernel1D};
use crate::error::{Error, Result};
use crate::geometry::{sample_homography, shape_vector, NormalizedCoord, Regime, Size, Transform};
use crate::model::Query;
use crate::raster::ImageBuffer;

/// Attempts at drawing a transform that admits a void-free crop.
pub const MAX_RESAMPLES: usize = 100;

/// One batch element.
#[derive(Clone, Debug)]
pub struct TrainSample {
    /// Void-free input crop.
    pub input: ImageBuffer,
    /// Inverse map from GT pixels to crop pixels.
    pub transform: Transform,
    pub queries: Vec<Query>,
    /// GT colour per query.
    pub gt: Vec<[f32; 3]>,
}

/// Draw an inverse map from GT pixels (`gt_size`) to an input canvas.
pub fn sample_transform<R: Rng + ?Sized>(regime: TrainRegime, gt_size: Size, rng: &mut R) -> Result<Transform> {
    let diag = |kx: f64, ky: f64| {
        // Round the input size, then use the exact size ratio.
        let in_size = Size::new(
            ((gt_size.h as f64 * ky).round() as usize).max(1),
            ((gt_size.w as f64 * kx).round() as usize).max(1),
        );
        let rx = in_size.w as f64 / gt_size.w as f64;
        let ry = in_size.h as f64 / gt_size.h as f64;
        Transform::homography([rx, 0.0, 0.0, 0.0, ry, 0.0, 0.0, 0.0, 1.0], in_size, gt_size)
    };
    match regime {
        TrainRegime::AsymmetricScale { max_scale } => {
            let lo = 1.0 / max_scale;
            let (kx, ky) = if lo < 1.0 {
                (rng.random_range(lo..1.0), rng.random_range(lo..1.0))
            } else {
                (1.0, 1.0)
            };
            diag(kx, ky)
        }
        TrainRegime::FixedScale { sx, sy } => diag(1.0 / sx, 1.0 / sy),
        TrainRegime::HomographyInScale => Ok(sample_homography(rng, Regime::InScale, gt_size)),
    }
}

/// Top-left corners of all `crop` windows of `mask` without invalid pixels.
pub fn void_free_windows(mask: &[bool], size: Size, crop: Size) -> Vec<(usize, usize)> {
    if crop.h > size.h || crop.w > size.w {
        return Vec::new();
    }
    // Integral image of invalid pixels, (h+1)×(w+1).
    let w1 = size.w + 1;
    let mut sat = vec![0u32; (size.h + 1) * w1];
    for r in 0..size.h {
        for c in 0..size.w {
            sat[(r + 1) * w1 + c + 1] =
                u32::from(!mask[r * size.w + c]) + sat[r * w1 + c + 1] + sat[(r + 1) * w1 + c] - sat[r * w1 + c];
        }
    }
    let mut out = Vec::new();
    for r in 0..=size.h - crop.h {
        for c in 0..=size.w - crop.w {
            let (r1, c1) = (r + crop.h, c + crop.w);
            if sat[r1 * w1 + c1] + sat[r * w1 + c] == sat[r * w1 + c1] + sat[r1 * w1 + c] {
                out.push((r, c));
            }
        }
    }
    out
}

/// Build one sample from `gt` and the inverse map `t` (GT pixels → input
/// canvas pixels). Fails with [`Error::NoValidCrop`] when no void-free crop
/// fits; callers then draw a new transform.
pub fn prepare_pair<R: Rng + ?Sized>(gt: &ImageBuffer, t: &Transform, cfg: &TrainConfig, rng: &mut R) -> Result<TrainSample> {
    if t.out_size() != gt.size() {
        return Err(Error::Shape {
            op: "prepare_pair",
            detail: format!("transform outputs {:?}, GT is {:?}", t.out_size(), gt.size()),
        });
    }
    let canvas = classical_warp(gt, &t.inverted()?, Kernel1D::Bicubic);
    let windows = void_free_windows(canvas.mask(), canvas.size(), cfg.crop);
    if windows.is_empty() {
        return Err(Error::NoValidCrop {
            crop_h: cfg.crop.h,
            crop_w: cfg.crop.w,
        });
    }
    let (row, col) = windows[rng.random_range(0..windows.len())];
    let input = canvas.crop(row, col, cfg.crop);
    let transform = t.crop_input([col as f64, row as f64], cfg.crop)?;

    let (queries, colours) = match cfg.gt_policy {
        GtPolicy::PixelCenter => pixel_center_queries(gt, &transform, cfg.queries, rng),
        GtPolicy::Bilinear => continuous_queries(gt, &transform, cfg.queries, rng),
    };
    if queries.is_empty() {
        return Err(Error::NoValidCrop {
            crop_h: cfg.crop.h,
            crop_w: cfg.crop.w,
        });
    }
    Ok(TrainSample {
        input,
        transform,
        queries,
        gt: colours,
    })
}

fn query_at(t: &Transform, y: NormalizedCoord) -> Option<Query> {
    let x = t.apply_inverse(y)?;
    let shape = shape_vector(t, y).ok().filter(|s| s.is_finite())?;
    Some(Query { x, shape })
}

fn pixel_center_queries<R: Rng + ?Sized>(
    gt: &ImageBuffer,
    t: &Transform,
    m: usize,
    rng: &mut R,
) -> (Vec<Query>, Vec<[f32; 3]>) {
    let size = gt.size();
    let candidates: Vec<usize> = (0..size.area())
        .filter(|&i| {
            t.apply_inverse(NormalizedCoord::pixel_center(i / size.w, i % size.w, size))
                .is_some()
        })
        .collect();
    if candidates.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let picks: Vec<usize> = if candidates.len() >= m {
        index::sample(rng, candidates.len(), m).into_vec()
    } else {
        (0..m).map(|_| rng.random_range(0..candidates.len())).collect()
    };
    let mut queries = Vec::with_capacity(m);
    let mut colours = Vec::with_capacity(m);
    for k in picks {
        let i = candidates[k];
        let (r, c) = (i / size.w, i % size.w);
        if let Some(q) = query_at(t, NormalizedCoord::pixel_center(r, c, size)) {
            queries.push(q);
            colours.push(gt.get(r, c));
        }
    }
    (queries, colours)
}

fn continuous_queries<R: Rng + ?Sized>(
    gt: &ImageBuffer,
    t: &Transform,
    m: usize,
    rng: &mut R,
) -> (Vec<Query>, Vec<[f32; 3]>) {
    let size = gt.size();
    let mut queries = Vec::with_capacity(m);
    let mut colours = Vec::with_capacity(m);
    let budget = 50 * m;
    for _ in 0..budget {
        if queries.len() == m {
            break;
        }
        let y = NormalizedCoord::from_pixel(
            [rng.random_range(0.0..size.w as f64), rng.random_range(0.0..size.h as f64)],
            size,
        );
        if let Some(q) = query_at(t, y) {
            queries.push(q);
            let v = sample(gt, y, Kernel1D::Bilinear);
            colours.push([v[0] as f32, v[1] as f32, v[2] as f32]);
        }
    }
    (queries, colours)
}

/// Draw transforms until one admits a crop, then build the sample.
pub fn draw_sample<R: Rng + ?Sized>(gt: &ImageBuffer, cfg: &TrainConfig, rng: &mut R) -> Result<TrainSample> {
    for _ in 0..MAX_RESAMPLES {
        let t = sample_transform(cfg.regime, gt.size(), rng)?;
        match prepare_pair(gt, &t, cfg, rng) {
            Err(Error::NoValidCrop { .. }) => continue,
            other => return other,
        }
    }
    Err(Error::NoValidCrop {
        crop_h: cfg.crop.h,
        crop_w: cfg.crop.w,
    })
}
