//! Grayscale frames and the small amount of image processing the flow
//! engine needs (blur, resampling, bilinear lookups).

use crate::error::{Error, Result};

/// Luma weights used when converting RGB input to grayscale.
pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

/// A single grayscale frame with intensities in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<f32>,
    frame_index: usize,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<f32>, frame_index: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "frame {frame_index} has zero size {width}x{height}"
            )));
        }
        if width * height != data.len() {
            return Err(Error::InvalidFrame(format!(
                "frame {frame_index}: {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidFrame(format!(
                "frame {frame_index}: intensity {v} outside [0, 1]"
            )));
        }
        Ok(GrayFrame {
            width,
            height,
            data,
            frame_index,
        })
    }

    /// Builds a frame from a closure evaluated at every `(x, y)` pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        frame_index: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data, frame_index)
    }

    /// Converts interleaved 8-bit RGB to grayscale.
    pub fn from_rgb8(width: usize, height: usize, rgb: &[u8], frame_index: usize) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::InvalidFrame(format!(
                "frame {frame_index}: expected {} rgb bytes, got {}",
                width * height * 3,
                rgb.len()
            )));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|px| {
                let luma = LUMA_WEIGHTS[0] * px[0] as f32
                    + LUMA_WEIGHTS[1] * px[1] as f32
                    + LUMA_WEIGHTS[2] * px[2] as f32;
                (luma / 255.0).clamp(0.0, 1.0)
            })
            .collect();
        Self::new(width, height, data, frame_index)
    }

    pub fn from_luma8(width: usize, height: usize, luma: &[u8], frame_index: usize) -> Result<Self> {
        let data = luma.iter().map(|&v| v as f32 / 255.0).collect();
        Self::new(width, height, data, frame_index)
    }

    /// Quantizes to 8-bit luma, rounding to nearest.
    pub fn to_luma8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub(crate) fn plane(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

/// Unvalidated single-channel f64 image used internally by the flow engine.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.at(x, y)
    }

    /// Bilinear lookup with replicated borders.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let v00 = self.at_clamped(xi, yi);
        let v10 = self.at_clamped(xi + 1, yi);
        let v01 = self.at_clamped(xi, yi + 1);
        let v11 = self.at_clamped(xi + 1, yi + 1);
        let top = v00 * (1.0 - fx) + v10 * fx;
        let bottom = v01 * (1.0 - fx) + v11 * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Separable Gaussian blur with replicated borders.
    pub fn gaussian_blur(&self, sigma: f64) -> Plane {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f64 = kernel.iter().sum();
        let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();

        let mut tmp = Plane::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    acc += w * self.at_clamped(x as isize + k as isize - radius, y as isize);
                }
                tmp.data[y * self.width + x] = acc;
            }
        }
        let mut out = Plane::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    acc += w * tmp.at_clamped(x as isize, y as isize + k as isize - radius);
                }
                out.data[y * self.width + x] = acc;
            }
        }
        out
    }

    /// Bilinear resize to the given dimensions (pixel-center aligned).
    pub fn resize(&self, width: usize, height: usize) -> Plane {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = Plane::zeros(width, height);
        for y in 0..height {
            let src_y = (y as f64 + 0.5) * sy - 0.5;
            for x in 0..width {
                let src_x = (x as f64 + 0.5) * sx - 0.5;
                out.data[y * width + x] = self.sample(src_x, src_y);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions_and_values() {
        assert!(GrayFrame::new(0, 3, vec![], 0).is_err());
        assert!(GrayFrame::new(2, 2, vec![0.0; 3], 0).is_err());
        assert!(GrayFrame::new(1, 1, vec![1.5], 0).is_err());
        assert!(GrayFrame::new(1, 1, vec![f32::NAN], 0).is_err());
        assert!(GrayFrame::new(1, 2, vec![0.0, 1.0], 0).is_ok());
    }

    #[test]
    fn rgb_uses_luma_weights() {
        let f = GrayFrame::from_rgb8(2, 1, &[255, 0, 0, 0, 0, 255], 0).unwrap();
        assert!((f.get(0, 0) - 0.299).abs() < 1e-6);
        assert!((f.get(1, 0) - 0.114).abs() < 1e-6);
    }

    #[test]
    fn luma8_roundtrip_is_exact() {
        let bytes: Vec<u8> = (0..=255).collect();
        let f = GrayFrame::from_luma8(16, 16, &bytes, 3).unwrap();
        assert_eq!(f.to_luma8(), bytes);
    }

    #[test]
    fn bilinear_sample_interpolates() {
        let p = Plane {
            width: 2,
            height: 1,
            data: vec![0.0, 1.0],
        };
        assert_eq!(p.sample(0.25, 0.0), 0.25);
        assert_eq!(p.sample(-3.0, 0.0), 0.0);
        assert_eq!(p.sample(5.0, 0.0), 1.0);
    }

    #[test]
    fn blur_preserves_constant() {
        let p = Plane {
            width: 5,
            height: 4,
            data: vec![0.4; 20],
        };
        let b = p.gaussian_blur(1.3);
        assert!(b.data.iter().all(|v| (v - 0.4).abs() < 1e-12));
    }
}
