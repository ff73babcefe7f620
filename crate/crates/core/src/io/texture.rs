//! Band-limited procedural textures used by the synthetic scene generator.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::frame::GrayFrame;
use crate::error::Result;

/// Sum of random plane waves, evaluable at any real coordinate so shifted
/// or warped copies can be rendered exactly.
#[derive(Debug, Clone)]
pub struct SineTexture {
    waves: Vec<Wave>,
    offset: f64,
    gain: f64,
}

#[derive(Debug, Clone, Copy)]
struct Wave {
    kx: f64,
    ky: f64,
    phase: f64,
    amp: f64,
}

impl SineTexture {
    /// `count` waves with wavelengths drawn from `[min_wavelength, max_wavelength]`.
    /// Output is centred on `mean` with peak deviation at most `contrast`.
    pub fn random(
        rng: &mut ChaCha8Rng,
        count: usize,
        min_wavelength: f64,
        max_wavelength: f64,
        mean: f64,
        contrast: f64,
    ) -> Self {
        let waves: Vec<Wave> = (0..count)
            .map(|_| {
                let wavelength = rng.random_range(min_wavelength..=max_wavelength);
                let angle = rng.random_range(0.0..std::f64::consts::PI);
                let k = std::f64::consts::TAU / wavelength;
                Wave {
                    kx: k * angle.cos(),
                    ky: k * angle.sin(),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                    amp: rng.random_range(0.5..1.0),
                }
            })
            .collect();
        let total: f64 = waves.iter().map(|w| w.amp).sum();
        SineTexture {
            waves,
            offset: mean,
            gain: if total > 0.0 { contrast / total } else { 0.0 },
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let s: f64 = self
            .waves
            .iter()
            .map(|w| w.amp * (w.kx * x + w.ky * y + w.phase).sin())
            .sum();
        self.offset + self.gain * s
    }

    /// Renders the texture translated by `(shift_x, shift_y)`.
    pub fn render(
        &self,
        width: usize,
        height: usize,
        shift_x: f64,
        shift_y: f64,
        frame_index: usize,
    ) -> Result<GrayFrame> {
        GrayFrame::from_fn(width, height, frame_index, |x, y| {
            self.eval(x as f64 - shift_x, y as f64 - shift_y).clamp(0.0, 1.0) as f32
        })
    }
}

/// Translates a frame by a (possibly fractional) offset with bilinear
/// resampling; samples falling outside are clamped to the border.
pub fn shift_bilinear(frame: &GrayFrame, shift_x: f64, shift_y: f64, frame_index: usize) -> Result<GrayFrame> {
    let plane = frame.plane();
    GrayFrame::from_fn(frame.width(), frame.height(), frame_index, |x, y| {
        plane.sample(x as f64 - shift_x, y as f64 - shift_y).clamp(0.0, 1.0) as f32
    })
}
