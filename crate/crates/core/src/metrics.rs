//! PSNR over all pixels or over a validity mask (mPSNR), in RGB on `[0, 1]`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::raster::ImageBuffer;

/// Peak signal-to-noise ratio in dB over the pixels selected by `mask` (all
/// pixels when `None`), all three channels. Identical inputs give `+∞`.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, mask: Option<&[bool]>) -> Result<f64> {
    Ok(psnr_with_count(a, b, mask)?.0)
}

/// PSNR restricted to pixels valid in both images.
pub fn mpsnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<(f64, usize)> {
    check_sizes(a, b)?;
    let both: Vec<bool> = a.mask().iter().zip(b.mask()).map(|(&x, &y)| x && y).collect();
    psnr_with_count(a, b, Some(&both))
}

fn check_sizes(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.size() != b.size() {
        return Err(Error::Shape {
            op: "psnr",
            detail: format!("{:?} vs {:?}", a.size(), b.size()),
        });
    }
    Ok(())
}

pub fn psnr_with_count(a: &ImageBuffer, b: &ImageBuffer, mask: Option<&[bool]>) -> Result<(f64, usize)> {
    check_sizes(a, b)?;
    if let Some(m) = mask {
        if m.len() != a.size().area() {
            return Err(Error::Shape {
                op: "psnr",
                detail: format!("mask has {} entries for {} pixels", m.len(), a.size().area()),
            });
        }
    }
    let mut sse = 0.0f64;
    let mut count = 0usize;
    for (i, (pa, pb)) in a.data().chunks(3).zip(b.data().chunks(3)).enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        count += 1;
        for k in 0..3 {
            let d = pa[k] as f64 - pb[k] as f64;
            sse += d * d;
        }
    }
    if count == 0 {
        return Err(Error::Shape {
            op: "psnr",
            detail: "no valid pixels to compare".into(),
        });
    }
    let mse = sse / (3 * count) as f64;
    let db = if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    };
    Ok((db, count))
}

/// One row of an evaluation report.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub image: String,
    pub metric: String,
    pub value: f64,
    pub valid_px: usize,
}

/// CSV with header `image,metric,value,valid_px`; infinite values print as
/// `inf`.
pub fn reports_to_csv(rows: &[MetricReport]) -> String {
    let mut out = String::from("image,metric,value,valid_px\n");
    for r in rows {
        let value = if r.value == f64::INFINITY {
            "inf".to_string()
        } else {
            format!("{:.6}", r.value)
        };
        let _ = writeln!(out, "{},{},{},{}", r.image, r.metric, value, r.valid_px);
    }
    out
}

/// Mean of finite values; `+∞` if every value is infinite.
pub fn aggregate_mean(values: &[f64]) -> f64 {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return if values.is_empty() { f64::NAN } else { f64::INFINITY };
    }
    finite.iter().sum::<f64>() / finite.len() as f64
}
