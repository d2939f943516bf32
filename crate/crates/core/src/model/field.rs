use std::ops::Range;

use super::{LtewNet, ENCODER_LAYERS};
use crate::error::{shape_err, Result};
use crate::geometry::{NormalizedCoord, Size};
use crate::nn::{conv3x3, relu, Scalar, Tensor};
use crate::raster::ImageBuffer;

/// Encoder output: one `C`-channel latent per input pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureField<T> {
    /// `1 × C × h × w`.
    pub z: Tensor<T>,
}

impl<T: Scalar> FeatureField<T> {
    pub fn size(&self) -> Size {
        Size::new(self.z.dim(2), self.z.dim(3))
    }

    pub fn channels(&self) -> usize {
        self.z.dim(1)
    }

    /// Normalized input coordinate of latent `(row, col)`; latents sit on
    /// input pixel centers.
    pub fn cell_center(&self, row: usize, col: usize) -> NormalizedCoord {
        NormalizedCoord::pixel_center(row, col, self.size())
    }
}

/// Per-cell amplitudes and frequencies.
///
/// Amplitude channels `0..D` scale the cosine branch and `D..2D` the sine
/// branch. Frequency channel `2k` is the horizontal and `2k + 1` the vertical
/// component of frequency `k`, in cycles per two input pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierField<T> {
    /// `1 × 2D × h × w`.
    pub amp: Tensor<T>,
    /// `1 × 2D × h × w`.
    pub freq: Tensor<T>,
    /// Cell-major copies (`h × w × 2D`) for per-query lookup.
    amp_cells: Vec<T>,
    freq_cells: Vec<T>,
}

impl<T: Scalar> FourierField<T> {
    pub fn new(amp: Tensor<T>, freq: Tensor<T>) -> Result<Self> {
        if amp.shape().len() != 4 || amp.shape() != freq.shape() || amp.dim(0) != 1 || amp.dim(1) % 2 != 0 {
            return Err(shape_err(
                "fourier field",
                format!("amp {:?} / freq {:?}", amp.shape(), freq.shape()),
            ));
        }
        let amp_cells = to_cell_major(&amp);
        let freq_cells = to_cell_major(&freq);
        Ok(Self {
            amp,
            freq,
            amp_cells,
            freq_cells,
        })
    }

    pub fn size(&self) -> Size {
        Size::new(self.amp.dim(2), self.amp.dim(3))
    }

    pub fn freq_pairs(&self) -> usize {
        self.amp.dim(1) / 2
    }

    /// `(A_j, F_j)` of cell `(row, col)`, each `2D` long.
    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> (&[T], &[T]) {
        let d2 = self.amp.dim(1);
        let i = (row * self.size().w + col) * d2;
        (&self.amp_cells[i..i + d2], &self.freq_cells[i..i + d2])
    }

    /// One record per cell in the window and frequency index.
    pub fn freq_dump(&self, rows: Range<usize>, cols: Range<usize>) -> Vec<FreqRecord> {
        let d = self.freq_pairs();
        let size = self.size();
        let rows = rows.start.min(size.h)..rows.end.min(size.h);
        let cols = cols.start.min(size.w)..cols.end.min(size.w);
        let mut out = Vec::with_capacity(rows.len() * cols.len() * d);
        for r in rows {
            for c in cols.clone() {
                let (a, f) = self.cell(r, c);
                for k in 0..d {
                    let (ac, as_) = (a[k].to_f64_lossy(), a[d + k].to_f64_lossy());
                    out.push(FreqRecord {
                        cx: c,
                        cy: r,
                        fx: f[2 * k].to_f64_lossy(),
                        fy: f[2 * k + 1].to_f64_lossy(),
                        magnitude: ac.hypot(as_),
                    });
                }
            }
        }
        out
    }
}

/// One estimated frequency of one latent cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreqRecord {
    pub cx: usize,
    pub cy: usize,
    pub fx: f64,
    pub fy: f64,
    /// `√(A_cos² + A_sin²)`.
    pub magnitude: f64,
}

impl FreqRecord {
    pub const CSV_HEADER: &'static str = "cx,cy,fx,fy,magnitude";

    pub fn csv_row(&self) -> String {
        format!("{},{},{:.6},{:.6},{:.6}", self.cx, self.cy, self.fx, self.fy, self.magnitude)
    }
}

fn to_cell_major<T: Scalar>(t: &Tensor<T>) -> Vec<T> {
    let (ch, hw) = (t.dim(1), t.dim(2) * t.dim(3));
    let mut out = vec![T::zero(); ch * hw];
    for (c, plane) in t.data().chunks(hw.max(1)).enumerate().take(ch) {
        for (p, &v) in plane.iter().enumerate() {
            out[p * ch + c] = v;
        }
    }
    out
}

/// Inverse of [`to_cell_major`] into a `1 × ch × h × w` tensor.
pub(crate) fn from_cell_major<T: Scalar>(cells: &[T], ch: usize, size: Size) -> Tensor<T> {
    let hw = size.area();
    let mut out = Tensor::zeros(&[1, ch, size.h, size.w]);
    for (p, cell) in cells.chunks(ch).enumerate() {
        for (c, &v) in cell.iter().enumerate() {
            out.data_mut()[c * hw + p] = v;
        }
    }
    out
}

pub(crate) fn image_tensor<T: Scalar>(img: &ImageBuffer) -> Tensor<T> {
    let (h, w) = (img.height(), img.width());
    let mut t = Tensor::zeros(&[1, 3, h, w]);
    for (p, px) in img.data().chunks(3).enumerate() {
        for c in 0..3 {
            t.data_mut()[c * h * w + p] = T::lit(px[c] as f64);
        }
    }
    t
}

impl<T: Scalar> LtewNet<T> {
    /// Latent grid of `img`; spatial size is preserved.
    pub fn encode(&self, img: &ImageBuffer) -> Result<FeatureField<T>> {
        Ok(self.encode_cached(img)?.0)
    }

    /// Encoder output plus the input of every conv layer (for backprop).
    pub(crate) fn encode_cached(&self, img: &ImageBuffer) -> Result<(FeatureField<T>, Vec<Tensor<T>>)> {
        let mut inputs = Vec::with_capacity(ENCODER_LAYERS);
        let mut x = image_tensor(img);
        for i in 0..ENCODER_LAYERS {
            let y = conv3x3(
                &x,
                self.w(&format!("encoder.conv{i}.w")),
                self.w(&format!("encoder.conv{i}.b")),
            )?;
            inputs.push(x);
            x = if i + 1 < ENCODER_LAYERS { relu(&y) } else { y };
        }
        Ok((FeatureField { z: x }, inputs))
    }

    /// Amplitude and frequency maps from the latent grid.
    pub fn estimate_fourier(&self, z: &FeatureField<T>) -> Result<FourierField<T>> {
        let amp = conv3x3(&z.z, self.w("amp.conv.w"), self.w("amp.conv.b"))?;
        let freq = conv3x3(&z.z, self.w("freq.conv.w"), self.w("freq.conv.b"))?;
        FourierField::new(amp, freq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LtewConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> LtewNet<f32> {
        LtewNet::init(LtewConfig::tiny(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn zero_biases(net: &mut LtewNet<f32>) {
        for (name, t) in net.weights_mut().iter_mut() {
            if name.ends_with(".b") {
                t.fill(0.0);
            }
        }
    }

    #[test]
    fn one_pixel_image() {
        let n = net(0);
        let img = ImageBuffer::from_fn(Size::new(1, 1), |_, _| [0.2, 0.5, 0.9]);
        let z = n.encode(&img).unwrap();
        assert_eq!(z.z.shape(), &[1, 16, 1, 1]);
        let f = n.estimate_fourier(&z).unwrap();
        assert_eq!(f.amp.shape(), &[1, 16, 1, 1]);
        assert_eq!(f.freq_dump(0..1, 0..1).len(), 8);
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_fields() {
        let mut n = net(1);
        zero_biases(&mut n);
        let img = ImageBuffer::new(Size::new(5, 7));
        let z = n.encode(&img).unwrap();
        assert!(z.z.data().iter().all(|&v| v == 0.0));
        let f = n.estimate_fourier(&z).unwrap();
        assert!(f.amp.data().iter().chain(f.freq.data()).all(|&v| v == 0.0));
        assert!(f.freq_dump(0..5, 0..7).iter().all(|r| r.magnitude == 0.0));
    }

    #[test]
    fn desk_head_shapes() {
        let n = LtewNet::<f32>::init(LtewConfig::desk(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let img = ImageBuffer::new(Size::new(4, 3));
        let f = n.estimate_fourier(&n.encode(&img).unwrap()).unwrap();
        assert_eq!(f.amp.shape(), &[1, 64, 4, 3]);
        assert_eq!(f.freq_pairs(), 32);
        assert_eq!(f.freq_dump(1..3, 0..3).len(), 2 * 3 * 32);
        assert!(f.freq_dump(2..2, 0..3).is_empty());
    }

    #[test]
    fn cell_major_round_trip() {
        let t = Tensor::from_fn(&[1, 4, 3, 5], |i| i as f32);
        let cells = to_cell_major(&t);
        assert_eq!(cells[..4], [0.0, 15.0, 30.0, 45.0]);
        assert_eq!(from_cell_major(&cells, 4, Size::new(3, 5)), t);
    }

    #[test]
    fn cell_centers_increase() {
        let n = net(3);
        let z = n.encode(&ImageBuffer::new(Size::new(3, 4))).unwrap();
        let us: Vec<f64> = (0..4).map(|c| z.cell_center(0, c).u).collect();
        assert!(us.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(z.cell_center(2, 3), NormalizedCoord::new(0.75, -1.0 + 5.0 / 3.0));
    }
}
