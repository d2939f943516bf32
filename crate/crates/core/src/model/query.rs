use super::{FourierField, LtewNet, DECODER_LAYERS};
use crate::error::{Error, Result};
use crate::geometry::{NormalizedCoord, ShapeVector, Size};
use crate::nn::{linear, pi, relu, Scalar, Tensor};

/// A valid query: inverse-mapped point and the pixel shape at the output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Query {
    pub x: NormalizedCoord,
    pub shape: ShapeVector,
}

/// One of the four latent cells contributing to a query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleTap {
    /// Latent cell, clamped to the grid.
    pub row: usize,
    pub col: usize,
    pub weight: f64,
    /// `x − x_j` in input pixels, horizontal first.
    pub delta: [f64; 2],
}

/// The 2×2 latent cells around `x` in the order `(0,0), (0,1), (1,0), (1,1)`
/// (row offset, column offset).
///
/// Each weight is the area of the rectangle spanned by `x` and the diagonally
/// opposite cell center. Weights come from the unclamped neighbor centers, so
/// they sum to one even at the border, where indices are clamped.
pub fn ensemble_taps(x: NormalizedCoord, latent: Size) -> [EnsembleTap; 4] {
    let p = x.to_pixel(latent);
    let (cx, cy) = (p[0] - 0.5, p[1] - 0.5);
    let (x0, y0) = (cx.floor(), cy.floor());
    let (fx, fy) = (cx - x0, cy - y0);
    let clamp = |i: f64, n: usize| (i.max(0.0) as usize).min(n - 1);
    let mut taps = [EnsembleTap {
        row: 0,
        col: 0,
        weight: 0.0,
        delta: [0.0; 2],
    }; 4];
    for (k, tap) in taps.iter_mut().enumerate() {
        let (dy, dx) = ((k / 2) as f64, (k % 2) as f64);
        let (row, col) = (clamp(y0 + dy, latent.h), clamp(x0 + dx, latent.w));
        let wx = if dx == 0.0 { 1.0 - fx } else { fx };
        let wy = if dy == 0.0 { 1.0 - fy } else { fy };
        *tap = EnsembleTap {
            row,
            col,
            weight: wx * wy,
            delta: [cx - col as f64, cy - row as f64],
        };
    }
    taps
}

/// `A ⊙ [cos π(⟨F, δ⟩ + p); sin π(⟨F, δ⟩ + p)]` written into `out` (`2D`).
///
/// `freq` holds `D` interleaved `(horizontal, vertical)` pairs.
pub fn synthesize_features<T: Scalar>(amp: &[T], freq: &[T], delta: [T; 2], phase: &[T], out: &mut [T]) {
    let d = phase.len();
    debug_assert!(amp.len() == 2 * d && freq.len() == 2 * d && out.len() == 2 * d);
    for k in 0..d {
        let arg = pi::<T>() * (freq[2 * k] * delta[0] + freq[2 * k + 1] * delta[1] + phase[k]);
        out[k] = amp[k] * arg.cos();
        out[d + k] = amp[d + k] * arg.sin();
    }
}

/// Everything computed for a batch of queries. Row `4q + j` belongs to tap
/// `j` of query `q`.
pub(crate) struct QueryForward<T> {
    pub taps: Vec<[EnsembleTap; 4]>,
    /// `Q × 10`.
    pub shapes: Tensor<T>,
    /// `4Q × D`: `⟨F, δ⟩ + p` before the factor π.
    pub args: Vec<T>,
    /// Input of each decoder layer; entry 0 is the `4Q × 2D` feature block.
    pub dec_inputs: Vec<Tensor<T>>,
    /// `Q × 3`.
    pub residual: Vec<T>,
}

impl<T: Scalar> LtewNet<T> {
    /// `h_p(s)` for a single shape vector.
    pub fn estimate_phase(&self, s: &ShapeVector) -> Result<Vec<T>> {
        if !s.is_finite() {
            return Err(Error::NonFinite("shape vector".into()));
        }
        let x = Tensor::new(&[1, ShapeVector::LEN], s.to_array().iter().map(|&v| T::lit(v)).collect())?;
        Ok(linear(&x, self.w("phase.linear.w"), self.w("phase.linear.b"))?.into_data())
    }

    /// Ensemble residual (without the skip) for each query.
    pub fn query_residuals(&self, fourier: &FourierField<T>, queries: &[Query]) -> Result<Vec<[T; 3]>> {
        let fwd = self.query_forward(fourier, queries, false)?;
        Ok(fwd.residual.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub(crate) fn query_forward(
        &self,
        fourier: &FourierField<T>,
        queries: &[Query],
        keep_activations: bool,
    ) -> Result<QueryForward<T>> {
        let d = self.config.freq_pairs;
        if fourier.freq_pairs() != d {
            return Err(Error::Shape {
                op: "query",
                detail: format!("field has {} frequency pairs, network {d}", fourier.freq_pairs()),
            });
        }
        let q = queries.len();
        let latent = fourier.size();
        let mut shapes = Vec::with_capacity(q * ShapeVector::LEN);
        for query in queries {
            if !query.shape.is_finite() {
                return Err(Error::NonFinite("shape vector".into()));
            }
            shapes.extend(query.shape.to_array().iter().map(|&v| T::lit(v)));
        }
        let shapes = Tensor::new(&[q, ShapeVector::LEN], shapes)?;
        let phase = linear(&shapes, self.w("phase.linear.w"), self.w("phase.linear.b"))?;

        let taps: Vec<[EnsembleTap; 4]> = queries.iter().map(|qr| ensemble_taps(qr.x, latent)).collect();
        let mut feat = Tensor::zeros(&[4 * q, 2 * d]);
        let mut args = vec![T::zero(); 4 * q * d];
        for (qi, qt) in taps.iter().enumerate() {
            let p = &phase.data()[qi * d..(qi + 1) * d];
            for (j, tap) in qt.iter().enumerate() {
                let r = 4 * qi + j;
                let (a, f) = fourier.cell(tap.row, tap.col);
                let delta = [T::lit(tap.delta[0]), T::lit(tap.delta[1])];
                let arg = &mut args[r * d..(r + 1) * d];
                for k in 0..d {
                    arg[k] = f[2 * k] * delta[0] + f[2 * k + 1] * delta[1] + p[k];
                }
                synthesize_features(a, f, delta, p, &mut feat.data_mut()[r * 2 * d..(r + 1) * 2 * d]);
            }
        }

        let mut dec_inputs = Vec::with_capacity(DECODER_LAYERS);
        let mut h = feat;
        for i in 0..DECODER_LAYERS {
            let y = linear(
                &h,
                self.w(&format!("decoder.layer{i}.w")),
                self.w(&format!("decoder.layer{i}.b")),
            )?;
            let next = if i + 1 < DECODER_LAYERS { relu(&y) } else { y };
            if keep_activations {
                dec_inputs.push(h);
            }
            h = next;
        }

        let mut residual = vec![T::zero(); 3 * q];
        for (qi, qt) in taps.iter().enumerate() {
            for (j, tap) in qt.iter().enumerate() {
                let w = T::lit(tap.weight);
                let out = &h.data()[(4 * qi + j) * 3..][..3];
                for c in 0..3 {
                    residual[3 * qi + c] += w * out[c];
                }
            }
        }
        Ok(QueryForward {
            taps,
            shapes,
            args,
            dec_inputs,
            residual,
        })
    }
}
