//! One-record text format describing a transform:
//!
//! ```text
//! scale <s_x> <s_y>
//! homography <m00> <m01> <m02> <m10> <m11> <m12> <m20> <m21> <m22> [<out_w> <out_h>]
//! erp <fov> <yaw> <pitch> <out_w> <out_h>
//! ```
//!
//! Blank lines and `#` comments are ignored. The input size is supplied when
//! the spec is bound to an image.

use std::str::FromStr;

use super::{ErpView, Size, Transform};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum TransformSpec {
    Scale { sx: f64, sy: f64 },
    /// Output size defaults to the input size when absent.
    Homography { m: [f64; 9], out: Option<Size> },
    Erp { view: ErpView, out: Size },
}

impl TransformSpec {
    /// Bind to an input image of `in_size`.
    pub fn build(&self, in_size: Size) -> Result<Transform> {
        match self {
            TransformSpec::Scale { sx, sy } => Transform::axis_scale(*sx, *sy, in_size),
            TransformSpec::Homography { m, out } => {
                Transform::homography(*m, in_size, out.unwrap_or(in_size))
            }
            TransformSpec::Erp { view, out } => Transform::erp_perspective(*view, *out, in_size),
        }
    }
}

impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut records = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let line = records
            .next()
            .ok_or_else(|| Error::TransformSpec("empty transform spec".into()))?;
        if records.next().is_some() {
            return Err(Error::TransformSpec("expected exactly one record".into()));
        }
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap_or_default();
        let args = tokens
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::TransformSpec(format!("`{t}` is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let arity = |want: &[usize]| -> Result<()> {
            if want.contains(&args.len()) {
                Ok(())
            } else {
                Err(Error::TransformSpec(format!(
                    "`{keyword}` takes {want:?} arguments, got {}",
                    args.len()
                )))
            }
        };
        match keyword {
            "scale" => {
                arity(&[2])?;
                Ok(TransformSpec::Scale {
                    sx: args[0],
                    sy: args[1],
                })
            }
            "homography" => {
                arity(&[9, 11])?;
                let mut m = [0.0; 9];
                m.copy_from_slice(&args[..9]);
                let out = if args.len() == 11 {
                    Some(Size::new(dim(args[10])?, dim(args[9])?))
                } else {
                    None
                };
                Ok(TransformSpec::Homography { m, out })
            }
            "erp" => {
                arity(&[5])?;
                Ok(TransformSpec::Erp {
                    view: ErpView {
                        fov_deg: args[0],
                        yaw_deg: args[1],
                        pitch_deg: args[2],
                    },
                    out: Size::new(dim(args[4])?, dim(args[3])?),
                })
            }
            other => Err(Error::TransformSpec(format!("unknown transform `{other}`"))),
        }
    }
}

fn dim(v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::TransformSpec(format!("`{v}` is not a positive image dimension")))
    }
}
