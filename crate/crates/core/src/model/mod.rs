//! The warping network: encoder, Fourier estimators, shape-driven phase,
//! local-ensemble decoding and the bilinear skip.
//!
//! Weight names:
//!
//! | name                     | shape            |
//! |--------------------------|------------------|
//! | `encoder.conv{0..3}.w`   | `C × {3,C} × 3 × 3` |
//! | `amp.conv.w`             | `2D × C × 3 × 3` |
//! | `freq.conv.w`            | `2D × C × 3 × 3` |
//! | `phase.linear.w`         | `D × 10`         |
//! | `decoder.layer0.w`       | `hidden × 2D`    |
//! | `decoder.layer{1,2}.w`   | `hidden × hidden`|
//! | `decoder.layer3.w`       | `3 × hidden`     |
//!
//! each with a matching `.b` bias.

mod backward;
mod field;
mod query;
mod warp;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::ShapeVector;
use crate::nn::{ModelWeights, Scalar, Tensor};

pub use backward::TrainForward;
pub use field::{FeatureField, FourierField, FreqRecord};
pub use query::{ensemble_taps, synthesize_features, EnsembleTap, Query};
pub use warp::{bilinear_skip, WarpOptions};

pub const ENCODER_LAYERS: usize = 4;
pub const DECODER_LAYERS: usize = 4;

/// Channel counts of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LtewConfig {
    /// Latent channels `C`.
    pub channels: usize,
    /// Frequency pairs `D`; amplitudes have `2D` entries.
    pub freq_pairs: usize,
    /// Decoder hidden width.
    pub hidden: usize,
}

impl LtewConfig {
    /// CPU-friendly default.
    pub const fn desk() -> Self {
        Self {
            channels: 64,
            freq_pairs: 32,
            hidden: 128,
        }
    }

    /// Estimator and decoder widths of the original architecture.
    pub const fn paper() -> Self {
        Self {
            channels: 64,
            freq_pairs: 128,
            hidden: 256,
        }
    }

    /// Small enough for exhaustive finite-difference checks and quick
    /// overfitting runs.
    pub const fn tiny() -> Self {
        Self {
            channels: 16,
            freq_pairs: 8,
            hidden: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.freq_pairs == 0 || self.hidden == 0 {
            return Err(Error::Config(format!("all widths must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Every weight name with its expected shape, in storage order.
    pub fn weight_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let (c, d2, hid) = (self.channels, 2 * self.freq_pairs, self.hidden);
        let mut out = Vec::new();
        for i in 0..ENCODER_LAYERS {
            let cin = if i == 0 { 3 } else { c };
            out.push((format!("encoder.conv{i}.w"), vec![c, cin, 3, 3]));
            out.push((format!("encoder.conv{i}.b"), vec![c]));
        }
        for head in ["amp", "freq"] {
            out.push((format!("{head}.conv.w"), vec![d2, c, 3, 3]));
            out.push((format!("{head}.conv.b"), vec![d2]));
        }
        out.push(("phase.linear.w".into(), vec![self.freq_pairs, ShapeVector::LEN]));
        out.push(("phase.linear.b".into(), vec![self.freq_pairs]));
        let dims = [d2, hid, hid, hid, 3];
        for i in 0..DECODER_LAYERS {
            out.push((format!("decoder.layer{i}.w"), vec![dims[i + 1], dims[i]]));
            out.push((format!("decoder.layer{i}.b"), vec![dims[i + 1]]));
        }
        out
    }
}

impl Default for LtewConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// Network configuration plus weights.
#[derive(Clone, Debug, PartialEq)]
pub struct LtewNet<T> {
    config: LtewConfig,
    weights: ModelWeights<T>,
}

impl<T: Scalar> LtewNet<T> {
    /// Random initialization, uniform in `±1/√fan_in` for weights and biases.
    pub fn init<R: Rng + ?Sized>(config: LtewConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut weights = ModelWeights::new();
        let mut fan_in = 1;
        for (name, shape) in config.weight_shapes() {
            if name.ends_with(".w") {
                fan_in = shape[1..].iter().product();
            }
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.insert(name, Tensor::uniform(&shape, bound, rng))?;
        }
        Ok(Self { config, weights })
    }

    /// Wrap loaded weights, inferring the configuration from their shapes.
    pub fn from_weights(weights: ModelWeights<T>) -> Result<Self> {
        let enc = weights.get("encoder.conv0.w")?;
        let amp = weights.get("amp.conv.w")?;
        let dec = weights.get("decoder.layer0.w")?;
        if enc.shape().len() != 4 || amp.shape().len() != 4 || dec.shape().len() != 2 || amp.dim(0) % 2 != 0 {
            return Err(Error::Config("weight shapes do not describe this network".into()));
        }
        let config = LtewConfig {
            channels: enc.dim(0),
            freq_pairs: amp.dim(0) / 2,
            hidden: dec.dim(0),
        };
        config.validate()?;
        let expected = config.weight_shapes();
        for (name, shape) in &expected {
            let t = weights.get(name)?;
            if t.shape() != shape.as_slice() {
                return Err(Error::Shape {
                    op: "load model",
                    detail: format!("`{name}` is {:?}, expected {shape:?}", t.shape()),
                });
            }
        }
        if weights.len() != expected.len() {
            return Err(Error::Config(format!(
                "weight file has {} tensors, the network uses {}",
                weights.len(),
                expected.len()
            )));
        }
        Ok(Self { config, weights })
    }

    pub fn config(&self) -> LtewConfig {
        self.config
    }

    pub fn weights(&self) -> &ModelWeights<T> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut ModelWeights<T> {
        &mut self.weights
    }

    pub fn into_weights(self) -> ModelWeights<T> {
        self.weights
    }

    pub fn cast<U: Scalar>(&self) -> LtewNet<U> {
        LtewNet {
            config: self.config,
            weights: self.weights.cast(),
        }
    }

    /// Weight tensor by name; names are validated at construction.
    pub(crate) fn w(&self, name: &str) -> &Tensor<T> {
        self.weights
            .get(name)
            .unwrap_or_else(|_| panic!("validated network lacks `{name}`"))
    }
}
