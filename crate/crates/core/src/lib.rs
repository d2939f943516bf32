//! Continuous image warping with local texture estimation.
//!
//! An encoder turns the input image into a latent grid; per latent cell two
//! convolutional estimators predict Fourier amplitudes and frequencies. A
//! query at output pixel `y` is mapped back through the inverse transform to
//! `x = f⁻¹(y)`; the offset from each of the four nearest latent cells, taken
//! in *input* space, drives the sinusoids, which absorbs the local Jacobian of
//! the transform into the frequency estimate. A phase term predicted from the
//! pixel's shape (Jacobian and Hessian of `f⁻¹`) and a bilinear skip complete
//! the estimate before an MLP decodes RGB.

pub mod baselines;
pub mod data;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod raster;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod training;

pub use crate::error::{Error, Result};
pub use crate::geometry::{NormalizedCoord, ShapeVector, Size, Transform};
pub use crate::model::{FeatureField, FourierField, LtewConfig, LtewNet, WarpOptions};
pub use crate::nn::{ModelWeights, Scalar, Tensor};
pub use crate::raster::ImageBuffer;



