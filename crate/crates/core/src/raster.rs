//! In-memory images with normalized `[0, 1]` intensities, plus 8-bit PNG/TIFF IO.
//!
//! Loading maps an 8-bit code `v` to `v / 255`. Writing maps back with
//! round-half-up, so load → save reproduces the original codes exactly.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image must have 1 or 3 channels, got {0}")]
    Channels(u8),
    #[error("image size {width}x{height}x{channels} does not match {len} samples")]
    Length {
        width: u32,
        height: u32,
        channels: u8,
        len: usize,
    },
    #[error("intensity {value} at sample {index} is outside [0, 1]")]
    Range { index: usize, value: f64 },
    #[error("image has zero size")]
    Empty,
    #[error("unsupported image extension for {0:?} (expected .png, .tif or .tiff)")]
    Extension(String),
    #[error(transparent)]
    Codec(#[from] image::ImageError),
}

/// Row-major, channel-interleaved image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<f64>) -> Result<Self, RasterError> {
        if channels != 1 && channels != 3 {
            return Err(RasterError::Channels(channels));
        }
        if width == 0 || height == 0 {
            return Err(RasterError::Empty);
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(RasterError::Length {
                width,
                height,
                channels,
                len: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(RasterError::Range { index, value });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Constant image. `value` is clamped into `[0, 1]`.
    pub fn filled(width: u32, height: u32, channels: u8, value: f64) -> Result<Self, RasterError> {
        let n = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value.clamp(0.0, 1.0); n])
    }

    /// Builds an image from a per-pixel closure returning one value per channel.
    pub fn from_fn(
        width: u32,
        height: u32,
        channels: u8,
        mut f: impl FnMut(u32, u32, u8) -> f64,
    ) -> Result<Self, RasterError> {
        let mut data = Vec::with_capacity(width as usize * height as usize * channels as usize);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    /// Crate-internal constructor for transforms that provably keep the range.
    pub(crate) fn from_parts(width: u32, height: u32, channels: u8, data: Vec<f64>) -> Self {
        debug_assert_eq!(
            data.len(),
            width as usize * height as usize * channels as usize
        );
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn channels(&self) -> u8 {
        self.channels
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32, c: u8) -> f64 {
        self.data[self.offset(x, y) + c as usize]
    }

    /// All channel values of one pixel.
    pub fn pixel(&self, x: u32, y: u32) -> &[f64] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels as usize]
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    /// 8-bit codes with round-half-up.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_u8(width: u32, height: u32, channels: u8, codes: &[u8]) -> Result<Self, RasterError> {
        Self::new(
            width,
            height,
            channels,
            codes.iter().map(|&v| f64::from(v) / 255.0).collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self, RasterError> {
        let img = image::open(path)?;
        Ok(Self::from_dynamic(img))
    }

    /// Converts a decoded image; alpha is dropped and deeper samples are
    /// reduced to 8 bits.
    pub fn from_dynamic(img: image::DynamicImage) -> Self {
        let (w, h) = (img.width(), img.height());
        if img.color().has_color() {
            let rgb = img.to_rgb8();
            Self::from_parts(w, h, 3, rgb.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect())
        } else {
            let luma = img.to_luma8();
            Self::from_parts(w, h, 1, luma.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect())
        }
    }

    /// Writes 8-bit PNG or TIFF, chosen by extension.
    pub fn save(&self, path: &Path) -> Result<(), RasterError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        let format = match ext.as_str() {
            "png" => image::ImageFormat::Png,
            "tif" | "tiff" => image::ImageFormat::Tiff,
            _ => return Err(RasterError::Extension(path.display().to_string())),
        };
        let color = if self.channels == 3 {
            image::ExtendedColorType::Rgb8
        } else {
            image::ExtendedColorType::L8
        };
        image::save_buffer_with_format(path, &self.to_u8(), self.width, self.height, color, format)?;
        Ok(())
    }
}

/// Round-half-up quantization of a `[0, 1]` intensity to an 8-bit code.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_code_survives_normalization() {
        for v in 0..=255u8 {
            assert_eq!(quantize(f64::from(v) / 255.0), v);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            ImageBuffer::new(2, 2, 2, vec![0.0; 8]),
            Err(RasterError::Channels(2))
        ));
        assert!(matches!(
            ImageBuffer::new(2, 2, 1, vec![0.0; 3]),
            Err(RasterError::Length { .. })
        ));
        assert!(matches!(
            ImageBuffer::new(1, 1, 1, vec![1.5]),
            Err(RasterError::Range { .. })
        ));
    }

    #[test]
    fn png_and_tiff_roundtrip_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let codes: Vec<u8> = (0..(7 * 5 * 3)).map(|i| (i * 37 % 256) as u8).collect();
        let rgb = ImageBuffer::from_u8(7, 5, 3, &codes).unwrap();
        let gray = ImageBuffer::from_u8(7, 5, 1, &codes[..35]).unwrap();
        for (img, name) in [(&rgb, "a.png"), (&rgb, "a.tif"), (&gray, "g.png"), (&gray, "g.tiff")] {
            let p = dir.path().join(name);
            img.save(&p).unwrap();
            let back = ImageBuffer::load(&p).unwrap();
            assert_eq!(back.to_u8(), img.to_u8(), "{name}");
            assert_eq!(back.channels(), img.channels());
        }
        assert!(rgb.save(&dir.path().join("x.jpg")).is_err());
    }
}
