//! RGB float images with a validity mask, and their PNG / binary PPM I/O.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Size;

/// `height × width × 3` interleaved RGB in `[0, 1]` plus a per-pixel validity
/// mask. Masked-out pixels hold exact zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    size: Size,
    data: Vec<f32>,
    mask: Vec<bool>,
}

impl ImageBuffer {
    /// All-valid black image.
    pub fn new(size: Size) -> Self {
        Self {
            size,
            data: vec![0.0; size.area() * 3],
            mask: vec![true; size.area()],
        }
    }

    pub fn from_rgb(size: Size, data: Vec<f32>) -> Result<Self> {
        if data.len() != size.area() * 3 {
            return Err(Error::Shape {
                op: "image",
                detail: format!("{}x{} image needs {} values, got {}", size.h, size.w, size.area() * 3, data.len()),
            });
        }
        Ok(Self {
            size,
            data,
            mask: vec![true; size.area()],
        })
    }

    pub fn from_fn(size: Size, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut img = Self::new(size);
        for r in 0..size.h {
            for c in 0..size.w {
                img.set(r, c, f(r, c));
            }
        }
        img
    }

    pub fn size(&self) -> Size {
        self.size
    }

    pub fn height(&self) -> usize {
        self.size.h
    }

    pub fn width(&self) -> usize {
        self.size.w
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * self.size.w + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, rgb: [f32; 3]) {
        let i = (row * self.size.w + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.size.w + col]
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&v| v).count()
    }

    /// Replace the mask and zero every pixel it excludes.
    pub fn set_mask(&mut self, mask: Vec<bool>) -> Result<()> {
        if mask.len() != self.size.area() {
            return Err(Error::Shape {
                op: "image mask",
                detail: format!("{} entries for {} pixels", mask.len(), self.size.area()),
            });
        }
        self.mask = mask;
        for (px, &ok) in self.data.chunks_mut(3).zip(&self.mask) {
            if !ok {
                px.fill(0.0);
            }
        }
        Ok(())
    }

    pub fn clamp01(&mut self) {
        self.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }

    /// Copy of the `size` window whose top-left pixel is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, size: Size) -> ImageBuffer {
        let mut out = ImageBuffer::new(size);
        for r in 0..size.h {
            for c in 0..size.w {
                out.set(r, c, self.get(row + r, col + c));
                out.mask[r * size.w + c] = self.is_valid(row + r, col + c);
            }
        }
        out
    }

    /// Decode an 8-bit RGB PNG or binary PPM; values become `v / 255`.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = ::image::ImageReader::open(path)
            .map_err(|e| img_err(path, e))?
            .with_guessed_format()
            .map_err(|e| img_err(path, e))?
            .decode()
            .map_err(|e| img_err(path, e))?
            .to_rgb8();
        let size = Size::new(img.height() as usize, img.width() as usize);
        let data = img.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
        Self::from_rgb(size, data)
    }

    /// Encode as PNG or binary PPM (chosen by extension) with
    /// `round(v · 255)` clamped to `[0, 255]`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        check_ext(path)?;
        let raw: Vec<u8> = self.data.iter().map(|&v| quantize(v)).collect();
        encode(path, &raw, self.size, ::image::ExtendedColorType::Rgb8)
    }

    /// Write the mask as 8-bit grayscale, 255 for valid pixels.
    pub fn write_mask(&self, path: impl AsRef<Path>) -> Result<()> {
        write_mask(&self.mask, self.size, path)
    }
}

pub fn write_mask(mask: &[bool], size: Size, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    check_ext(path)?;
    let raw: Vec<u8> = mask.iter().map(|&v| if v { 255 } else { 0 }).collect();
    encode(path, &raw, size, ::image::ExtendedColorType::L8)
}

/// PNG for `.png`; otherwise binary netpbm (P6 for RGB, P5 for gray). The
/// crate's default for `.ppm` is PAM, which most viewers reject.
fn encode(path: &Path, raw: &[u8], size: Size, color: ::image::ExtendedColorType) -> Result<()> {
    use ::image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
    use ::image::ImageEncoder;
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let (w, h) = (size.w as u32, size.h as u32);
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let res = if is_png {
        ::image::codecs::png::PngEncoder::new(file).write_image(raw, w, h, color)
    } else {
        let subtype = match color {
            ::image::ExtendedColorType::L8 => PnmSubtype::Graymap(SampleEncoding::Binary),
            _ => PnmSubtype::Pixmap(SampleEncoding::Binary),
        };
        PnmEncoder::new(file).with_subtype(subtype).write_image(raw, w, h, color)
    };
    res.map_err(|e| img_err(path, e))
}

/// Read a grayscale (or RGB) mask; pixels above mid-gray are valid.
pub fn read_mask(path: impl AsRef<Path>) -> Result<(Size, Vec<bool>)> {
    let path = path.as_ref();
    let img = ::image::ImageReader::open(path)
        .map_err(|e| img_err(path, e))?
        .with_guessed_format()
        .map_err(|e| img_err(path, e))?
        .decode()
        .map_err(|e| img_err(path, e))?
        .to_luma8();
    let size = Size::new(img.height() as usize, img.width() as usize);
    Ok((size, img.into_raw().into_iter().map(|v| v > 127).collect()))
}

fn quantize(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

fn check_ext(path: &Path) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("png" | "ppm" | "pgm" | "pnm") => Ok(()),
        _ => Err(Error::Image {
            path: path.to_path_buf(),
            msg: "unsupported format (expected .png, .ppm or .pgm)".into(),
        }),
    }
}

fn img_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_image(size: Size) -> ImageBuffer {
        ImageBuffer::from_fn(size, |r, c| {
            let k = (r * size.w + c) * 3;
            [
                (k % 256) as f32 / 255.0,
                ((k + 1) % 256) as f32 / 255.0,
                ((k + 2) % 256) as f32 / 255.0,
            ]
        })
    }

    #[test]
    fn png_and_ppm_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let img = grid_image(Size::new(9, 13));
        for name in ["a.png", "a.ppm"] {
            let p = dir.path().join(name);
            img.write(&p).unwrap();
            assert_eq!(ImageBuffer::read(&p).unwrap(), img, "{name}");
        }
        let png = ImageBuffer::read(dir.path().join("a.png")).unwrap();
        let ppm = ImageBuffer::read(dir.path().join("a.ppm")).unwrap();
        assert_eq!(png, ppm);
        let raw = std::fs::read(dir.path().join("a.ppm")).unwrap();
        assert_eq!(&raw[..2], b"P6");
    }

    #[test]
    fn one_pixel_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::from_fn(Size::new(1, 1), |_, _| [1.0, 0.0, 128.0 / 255.0]);
        let p = dir.path().join("one.png");
        img.write(&p).unwrap();
        assert_eq!(ImageBuffer::read(&p).unwrap(), img);
    }

    #[test]
    fn quantization_rounds_and_clamps() {
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(0.501 / 255.0), 1);
    }

    #[test]
    fn mask_round_trip_and_zeroing() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = grid_image(Size::new(4, 5));
        let mask: Vec<bool> = (0..20).map(|i| i % 3 != 0).collect();
        img.set_mask(mask.clone()).unwrap();
        assert_eq!(img.get(0, 0), [0.0; 3]);
        let p = dir.path().join("m.png");
        img.write_mask(&p).unwrap();
        assert_eq!(read_mask(&p).unwrap(), (Size::new(4, 5), mask));
    }

    #[test]
    fn errors_on_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let img = grid_image(Size::new(2, 2));
        assert!(matches!(img.write(dir.path().join("x.jpg")), Err(Error::Image { .. })));
        let junk = dir.path().join("junk.png");
        std::fs::write(&junk, b"definitely not a png").unwrap();
        assert!(matches!(ImageBuffer::read(&junk), Err(Error::Image { .. })));
        assert!(ImageBuffer::read(dir.path().join("missing.png")).is_err());
    }
}
