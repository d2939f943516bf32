//! Training forward pass and hand-written backpropagation through the
//! decoder, the Fourier synthesis, the estimators and the encoder.

use super::field::from_cell_major;
use super::query::QueryForward;
use super::{FeatureField, FourierField, LtewNet, Query, DECODER_LAYERS, ENCODER_LAYERS};
use crate::baselines::{sample, Kernel1D};
use crate::error::{shape_err, Result};
use crate::nn::{conv3x3, conv3x3_backward, linear, linear_backward, pi, relu_backward, ModelWeights, Scalar, Tensor};
use crate::raster::ImageBuffer;

/// Unclipped predictions for a batch of queries on one input, with the
/// activations needed to backpropagate.
pub struct TrainForward<T> {
    enc_inputs: Vec<Tensor<T>>,
    z: FeatureField<T>,
    fourier: FourierField<T>,
    queries: QueryForward<T>,
    /// `Q × 3`, skip plus residual.
    pub pred: Vec<T>,
}

impl<T: Scalar> TrainForward<T> {
    /// Smallest `|pre-activation|` over every ReLU of the pass that `net`
    /// produced. Finite differences are only meaningful away from the kink.
    pub(crate) fn relu_margin(&self, net: &LtewNet<T>) -> Result<f64> {
        let mut m = f64::INFINITY;
        let mut fold = |t: &Tensor<T>| {
            for v in t.data() {
                m = m.min(v.to_f64_lossy().abs());
            }
        };
        for i in 0..ENCODER_LAYERS - 1 {
            let w = net.w(&format!("encoder.conv{i}.w"));
            fold(&conv3x3(&self.enc_inputs[i], w, net.w(&format!("encoder.conv{i}.b")))?);
        }
        for i in 0..DECODER_LAYERS - 1 {
            let w = net.w(&format!("decoder.layer{i}.w"));
            fold(&linear(&self.queries.dec_inputs[i], w, net.w(&format!("decoder.layer{i}.b")))?);
        }
        Ok(m)
    }
}

impl<T: Scalar> LtewNet<T> {
    pub fn forward_train(&self, input: &ImageBuffer, queries: &[Query]) -> Result<TrainForward<T>> {
        let (z, enc_inputs) = self.encode_cached(input)?;
        let fourier = self.estimate_fourier(&z)?;
        let qf = self.query_forward(&fourier, queries, true)?;
        let mut pred = qf.residual.clone();
        for (q, p) in queries.iter().zip(pred.chunks_mut(3)) {
            let skip = sample(input, q.x, Kernel1D::Bilinear);
            for c in 0..3 {
                p[c] += T::lit(skip[c]);
            }
        }
        Ok(TrainForward {
            enc_inputs,
            z,
            fourier,
            queries: qf,
            pred,
        })
    }

    /// Add `∂L/∂θ` to `grads` given `dpred = ∂L/∂pred` (`Q × 3`).
    pub fn backward(&self, fwd: &TrainForward<T>, dpred: &[T], grads: &mut ModelWeights<T>) -> Result<()> {
        let qf = &fwd.queries;
        let q = qf.taps.len();
        if dpred.len() != 3 * q {
            return Err(shape_err("backward", format!("{} gradient entries for {q} queries", dpred.len())));
        }
        let d = self.config.freq_pairs;

        // Decoder.
        let mut up = Tensor::zeros(&[4 * q, 3]);
        for (qi, qt) in qf.taps.iter().enumerate() {
            for (j, tap) in qt.iter().enumerate() {
                let w = T::lit(tap.weight);
                for c in 0..3 {
                    up.data_mut()[(4 * qi + j) * 3 + c] = w * dpred[3 * qi + c];
                }
            }
        }
        for i in (0..DECODER_LAYERS).rev() {
            let x = &qf.dec_inputs[i];
            let g = linear_backward(x, self.w(&format!("decoder.layer{i}.w")), &up)?;
            grads.get_mut(&format!("decoder.layer{i}.w"))?.add_assign(&g.dw)?;
            grads.get_mut(&format!("decoder.layer{i}.b"))?.add_assign(&g.db)?;
            // `x` is the ReLU output of the previous layer except for i = 0.
            up = if i > 0 { relu_backward(x, &g.dx)? } else { g.dx };
        }
        let dfeat = up;

        // Fourier synthesis: scatter into per-cell gradients.
        let latent = fwd.fourier.size();
        let mut damp = vec![T::zero(); latent.area() * 2 * d];
        let mut dfreq = vec![T::zero(); latent.area() * 2 * d];
        let mut dphase = Tensor::zeros(&[q, d]);
        let pi_t = pi::<T>();
        for (qi, qt) in qf.taps.iter().enumerate() {
            for (j, tap) in qt.iter().enumerate() {
                let r = 4 * qi + j;
                let (a, _) = fwd.fourier.cell(tap.row, tap.col);
                let g = &dfeat.data()[r * 2 * d..(r + 1) * 2 * d];
                let args = &qf.args[r * d..(r + 1) * d];
                let cell = (tap.row * latent.w + tap.col) * 2 * d;
                let delta = [T::lit(tap.delta[0]), T::lit(tap.delta[1])];
                for k in 0..d {
                    let (s, c) = (pi_t * args[k]).sin_cos();
                    damp[cell + k] += g[k] * c;
                    damp[cell + d + k] += g[d + k] * s;
                    let darg = pi_t * (g[d + k] * a[d + k] * c - g[k] * a[k] * s);
                    dfreq[cell + 2 * k] += darg * delta[0];
                    dfreq[cell + 2 * k + 1] += darg * delta[1];
                    dphase.data_mut()[qi * d + k] += darg;
                }
            }
        }
        let g = linear_backward(&qf.shapes, self.w("phase.linear.w"), &dphase)?;
        grads.get_mut("phase.linear.w")?.add_assign(&g.dw)?;
        grads.get_mut("phase.linear.b")?.add_assign(&g.db)?;

        // Estimators.
        let mut dz = Tensor::zeros(fwd.z.z.shape());
        for (head, cells) in [("amp", damp), ("freq", dfreq)] {
            let upstream = from_cell_major(&cells, 2 * d, latent);
            let g = conv3x3_backward(&fwd.z.z, self.w(&format!("{head}.conv.w")), &upstream)?;
            grads.get_mut(&format!("{head}.conv.w"))?.add_assign(&g.dw)?;
            grads.get_mut(&format!("{head}.conv.b"))?.add_assign(&g.db)?;
            dz.add_assign(&g.dx)?;
        }

        // Encoder.
        let mut up = dz;
        for i in (0..ENCODER_LAYERS).rev() {
            let x = &fwd.enc_inputs[i];
            let g = conv3x3_backward(x, self.w(&format!("encoder.conv{i}.w")), &up)?;
            grads.get_mut(&format!("encoder.conv{i}.w"))?.add_assign(&g.dw)?;
            grads.get_mut(&format!("encoder.conv{i}.b"))?.add_assign(&g.db)?;
            if i > 0 {
                up = relu_backward(x, &g.dx)?;
            }
        }
        Ok(())
    }
}
