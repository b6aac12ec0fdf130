//! Grid data model: physical-value maps and their 8-bit image form.

use std::path::Path;

use crate::codec::{ChannelCodec, ChannelKind};
use crate::error::{Error, Result};

/// A `width x height` map of physical channel-knowledge values, row-major.
///
/// Physical values are the source of truth; [`PixelImage`] is only a
/// serialization. `mask[i]` marks building or otherwise invalid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CkmGrid {
    width: usize,
    height: usize,
    codec: ChannelCodec,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl CkmGrid {
    pub fn new(
        width: usize,
        height: usize,
        codec: ChannelCodec,
        values: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        let n = width * height;
        if values.len() != n || mask.len() != n {
            return Err(Error::Shape(format!(
                "{width}x{height} grid needs {n} values and mask cells, got {} and {}",
                values.len(),
                mask.len()
            )));
        }
        Ok(Self {
            width,
            height,
            codec,
            values,
            mask,
        })
    }

    /// Grid without masked cells.
    pub fn from_values(
        width: usize,
        height: usize,
        codec: ChannelCodec,
        values: Vec<f64>,
    ) -> Result<Self> {
        let n = values.len();
        Self::new(width, height, codec, values, vec![false; n])
    }

    pub fn filled(width: usize, height: usize, codec: ChannelCodec, value: f64) -> Result<Self> {
        Self::from_values(width, height, codec, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> ChannelKind {
        self.codec.kind
    }

    pub fn codec(&self) -> &ChannelCodec {
        &self.codec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn is_masked(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col]
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<bool>) {
        (self.values, self.mask)
    }

    /// Same geometry and codec, new values (mask carried over).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.codec.clone(),
            values,
            self.mask.clone(),
        )
    }

    /// Re-labels the grid with another codec, e.g. after ingestion.
    pub fn with_codec(mut self, codec: ChannelCodec) -> Self {
        self.codec = codec;
        self
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut g = self.clone();
        g.values.iter_mut().for_each(|v| *v = f(*v));
        g
    }

    /// Clamps every value into the codec domain.
    pub fn clamped(mut self) -> Self {
        let (lo, hi) = (self.codec.v_min, self.codec.v_max);
        self.values.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
        self
    }
}

/// 8-bit single-channel image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl PixelImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let luma = img.into_luma8();
        let (w, h) = luma.dimensions();
        Self::new(w as usize, h as usize, luma.into_raw())
    }

    /// Writes an 8-bit grayscale PNG (atomically).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::atomic::write_with(path.as_ref(), |tmp| {
            image::save_buffer_with_format(
                tmp,
                &self.pixels,
                self.width as u32,
                self.height as u32,
                image::ColorType::L8,
                image::ImageFormat::Png,
            )
            .map_err(|source| Error::Image {
                path: tmp.to_path_buf(),
                source,
            })
        })
    }
}

/// Quantizes a grid to pixels. Masked cells take the sentinel pixel when the
/// codec defines one.
pub fn encode_grid(grid: &CkmGrid, codec: &ChannelCodec) -> Result<PixelImage> {
    let sentinel = codec.sentinel_pixel();
    let mut pixels = Vec::with_capacity(grid.values.len());
    for (i, (&v, &masked)) in grid.values.iter().zip(&grid.mask).enumerate() {
        if !v.is_finite() {
            return Err(Error::ValueDomain {
                row: i / grid.width,
                col: i % grid.width,
                value: v,
            });
        }
        pixels.push(match (masked, sentinel) {
            (true, Some(s)) => s,
            _ => codec.encode_value(v),
        });
    }
    PixelImage::new(grid.width, grid.height, pixels)
}

/// Maps pixels back to physical values; the sentinel pixel sets the mask.
pub fn decode_image(img: &PixelImage, codec: &ChannelCodec) -> CkmGrid {
    let sentinel = codec.sentinel_pixel();
    let values = img.pixels.iter().map(|&p| codec.decode_pixel(p)).collect();
    let mask = img.pixels.iter().map(|&p| Some(p) == sentinel).collect();
    CkmGrid {
        width: img.width,
        height: img.height,
        codec: codec.clone(),
        values,
        mask,
    }
}
