use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the warping engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("singular transform: {0}")]
    Singular(String),

    #[error("point is behind the camera or on the horizon of the map")]
    BehindView,

    #[error("analytic Jacobian is unavailable for {0} transforms; use the numeric version")]
    NoAnalyticJacobian(&'static str),

    #[error("derivative stencil leaves the domain of the map at ({u:.6}, {v:.6})")]
    StencilOutOfDomain { u: f64, v: f64 },

    #[error("degenerate Jacobian (|det| = {0:e})")]
    DegenerateJacobian(f64),

    #[error("invalid field of view {0} degrees (must be in (0, 180))")]
    InvalidFov(f64),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("transform spec: {0}")]
    TransformSpec(String),

    #[error("weight file has a bad magic header")]
    BadMagic,

    #[error("weight file is truncated ({0})")]
    Truncated(&'static str),

    #[error("duplicate tensor name `{0}` in weight file")]
    DuplicateName(String),

    #[error("missing weight tensor `{0}`")]
    MissingWeight(String),

    #[error("config: {0}")]
    Config(String),

    #[error("no void-free crop of {crop_h}x{crop_w} fits the warped input")]
    NoValidCrop { crop_h: usize, crop_w: usize },

    #[error("non-finite loss at step {step} (lr {lr:e}): {detail}")]
    Diverged { step: usize, lr: f64, detail: String },

    #[error("image {path}: {msg}")]
    Image { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Shape {
        op,
        detail: detail.into(),
    }
}
