//! Image and feature-map value types plus 8-bit PNG ingestion.

use std::path::Path;

use crate::error::{Error, Result};
use crate::kernels;
use crate::tensor::Tensor;

/// A `[C, H, W]` image with every value in `[0, 1]`; `C` is 1 or 3.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor(Tensor);

impl ImageTensor {
    pub fn new(t: Tensor) -> Result<Self> {
        let s = t.shape();
        if s.len() != 3 {
            return Err(Error::Validation(format!("image must be [C,H,W], got {s:?}")));
        }
        if s[0] != 1 && s[0] != 3 {
            return Err(Error::Validation(format!("image must have 1 or 3 channels, got {}", s[0])));
        }
        if s[1] == 0 || s[2] == 0 {
            return Err(Error::Validation(format!("image has an empty spatial extent {s:?}")));
        }
        if let Some(v) = t.data().iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Validation(format!("image value {v} outside [0, 1]")));
        }
        Ok(ImageTensor(t))
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(Tensor::new(vec![channels, height, width], data)?)
    }

    pub fn constant(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(Tensor::full(&[channels, height, width], value))
    }

    /// Clamp into range then validate; for operator outputs.
    pub(crate) fn from_clamped(mut t: Tensor) -> Result<Self> {
        for v in t.data_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        Self::new(t)
    }

    pub fn channels(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.0.shape()[2]
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels(), self.height(), self.width()]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.0.data()[(c * self.height() + y) * self.width() + x]
    }

    /// Rec. 601 luma for RGB, identity for single-channel images. Returns `[H*W]` row-major.
    pub fn luma(&self) -> Vec<f64> {
        let hw = self.height() * self.width();
        let d = self.data();
        if self.channels() == 1 {
            d.to_vec()
        } else {
            (0..hw)
                .map(|i| 0.299 * d[i] + 0.587 * d[hw + i] + 0.114 * d[2 * hw + i])
                .collect()
        }
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let (channels, width, height, raw) = match img {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                (1, w as usize, h as usize, g.into_raw())
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                (3, w as usize, h as usize, rgb.into_raw())
            }
        };
        let hw = width * height;
        let mut data = vec![0.0; channels * hw];
        for i in 0..hw {
            for c in 0..channels {
                data[c * hw + i] = raw[i * channels + c] as f64 / 255.0;
            }
        }
        Self::from_vec(channels, height, width, data)
    }

    pub fn to_u8(&self) -> Vec<u8> {
        let (c, hw) = (self.channels(), self.height() * self.width());
        let d = self.data();
        let mut raw = vec![0u8; c * hw];
        for i in 0..hw {
            for ch in 0..c {
                raw[i * c + ch] = (d[ch * hw + i] * 255.0).round().clamp(0.0, 255.0) as u8;
            }
        }
        raw
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let raw = self.to_u8();
        let (w, h) = (self.width() as u32, self.height() as u32);
        let color = if self.channels() == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        image::save_buffer(path, &raw, w, h, color).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Quantize to 8 bits and back, matching a PNG round trip.
    pub fn quantized(&self) -> Self {
        ImageTensor(self.0.map(|v| (v * 255.0).round() / 255.0))
    }
}

/// Where a training crop comes from in its source image.
///
/// Output pixel `(y, x)` reads source row `reflect(top + y')` and column
/// `reflect(left + x')`, where `y'`/`x'` are mirrored when the matching flip is
/// set. Sources smaller than the crop are therefore reflect-padded on the
/// bottom and right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropGeometry {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
    pub hflip: bool,
    pub vflip: bool,
}

impl CropGeometry {
    pub fn identity(height: usize, width: usize) -> Self {
        CropGeometry {
            top: 0,
            left: 0,
            height,
            width,
            hflip: false,
            vflip: false,
        }
    }

    /// Flat source index for every output pixel of a `src_h × src_w` plane.
    pub fn source_indices(&self, src_h: usize, src_w: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.height * self.width);
        for y in 0..self.height {
            let yy = if self.vflip { self.height - 1 - y } else { y };
            let sy = kernels::reflect_index((self.top + yy) as isize, src_h);
            for x in 0..self.width {
                let xx = if self.hflip { self.width - 1 - x } else { x };
                let sx = kernels::reflect_index((self.left + xx) as isize, src_w);
                out.push(sy * src_w + sx);
            }
        }
        out
    }

    pub fn apply(&self, img: &ImageTensor) -> ImageTensor {
        let (c, h, w) = (img.channels(), img.height(), img.width());
        let idx = self.source_indices(h, w);
        let d = img.data();
        let mut data = Vec::with_capacity(c * idx.len());
        for ch in 0..c {
            data.extend(idx.iter().map(|&i| d[ch * h * w + i]));
        }
        ImageTensor(Tensor::from_parts(vec![c, self.height, self.width], data))
    }
}

/// A finite `[C, H, W]` activation map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap(Tensor);

impl FeatureMap {
    pub fn new(t: Tensor) -> Result<Self> {
        if t.shape().len() != 3 {
            return Err(Error::Shape(format!("feature map must be [C,H,W], got {:?}", t.shape())));
        }
        if !t.all_finite() {
            return Err(Error::Validation("feature map contains non-finite values".into()));
        }
        Ok(FeatureMap(t))
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(Tensor::new(vec![channels, height, width], data)?)
    }

    pub fn channels(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.0.shape()[2]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_bad_channels() {
        assert!(ImageTensor::from_vec(1, 1, 2, vec![0.5, 1.5]).is_err());
        assert!(ImageTensor::from_vec(2, 1, 1, vec![0.5, 0.5]).is_err());
        assert!(ImageTensor::from_vec(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(ImageTensor::from_vec(3, 1, 1, vec![0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn png_round_trip_is_exact_on_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<f64> = (0..3 * 4 * 5).map(|i| ((i * 17) % 256) as f64 / 255.0).collect();
        let img = ImageTensor::from_vec(3, 4, 5, data).unwrap();
        let p = dir.path().join("a.png");
        img.save_png(&p).unwrap();
        assert_eq!(ImageTensor::load_png(&p).unwrap(), img);
    }

    #[test]
    fn crop_geometry_flips_and_pads() {
        let img = ImageTensor::from_vec(1, 2, 3, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert_eq!(CropGeometry::identity(2, 3).apply(&img), img);
        let mut g = CropGeometry::identity(2, 3);
        g.hflip = true;
        assert_eq!(g.apply(&img).data(), &[0.2, 0.1, 0.0, 0.5, 0.4, 0.3]);
        let padded = CropGeometry::identity(3, 4).apply(&img);
        assert_eq!(padded.data(), &[0.0, 0.1, 0.2, 0.1, 0.3, 0.4, 0.5, 0.4, 0.0, 0.1, 0.2, 0.1]);
    }
}
