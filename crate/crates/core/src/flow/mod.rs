//! Dense optical flow (Farnebäck polynomial expansion, coarse-to-fine).

mod cache;
mod farneback;
mod poly;

pub use cache::{read_flow, read_flow_file, write_flow, write_flow_file, FLOW_MAGIC};
pub use farneback::{estimate_flow, estimate_flow_expanded, expand_frame, FrameExpansion};
pub use poly::{polynomial_expansion, PolyExpansion, QuadCoeffs};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pyramid and expansion parameters for [`estimate_flow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PyramidConfig {
    pub levels: usize,
    /// Size ratio between successive pyramid levels.
    pub scale: f64,
    /// Half-width of the polynomial-expansion neighbourhood; also bounds the
    /// displacement averaging window.
    pub window_radius: usize,
    pub iterations: usize,
    /// Width of the Gaussian applicability used in the expansion fit.
    pub poly_sigma: f64,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        PyramidConfig {
            levels: 3,
            scale: 0.5,
            window_radius: 7,
            iterations: 3,
            poly_sigma: 1.5,
        }
    }
}

impl PyramidConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 {
            return Err(Error::Config("pyramid levels must be >= 1".into()));
        }
        if !(self.scale > 0.0 && self.scale < 1.0) {
            return Err(Error::Config(format!(
                "pyramid scale {} not in (0, 1)",
                self.scale
            )));
        }
        if self.window_radius < 2 {
            return Err(Error::Config("window_radius must be >= 2".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if !(self.poly_sigma > 0.0 && self.poly_sigma.is_finite()) {
            return Err(Error::Config("poly_sigma must be > 0".into()));
        }
        Ok(())
    }

    /// Smallest width/height a level needs for the expansion window to fit.
    pub fn min_extent(&self) -> usize {
        2 * self.window_radius + 1
    }
}

/// Per-pixel displacement from one frame to the next, in pixels per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    dx: Vec<f32>,
    dy: Vec<f32>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, dx: Vec<f32>, dy: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("flow field {width}x{height}")));
        }
        if dx.len() != width * height || dy.len() != width * height {
            return Err(Error::Dimension(format!(
                "flow field {width}x{height} with {} / {} components",
                dx.len(),
                dy.len()
            )));
        }
        if dx.iter().chain(dy.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("flow field has non-finite components".into()));
        }
        Ok(FlowField { width, height, dx, dy })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    /// Uniform field, mostly useful in tests.
    pub fn uniform(width: usize, height: usize, dx: f32, dy: f32) -> Self {
        FlowField {
            width,
            height,
            dx: vec![dx; width * height],
            dy: vec![dy; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dx(&self) -> &[f32] {
        &self.dx
    }

    pub fn dy(&self) -> &[f32] {
        &self.dy
    }

    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }

    pub fn max_abs_component(&self) -> f32 {
        self.dx
            .iter()
            .chain(self.dy.iter())
            .fold(0.0f32, |m, v| m.max(v.abs()))
    }
}

/// One flow vector in polar form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarSample {
    /// Pixels per frame.
    pub magnitude: f64,
    /// Undirected orientation in degrees, `[0, 180)`.
    pub orientation: f64,
}

impl PolarSample {
    pub fn from_vector(dx: f64, dy: f64) -> Self {
        let magnitude = (dx * dx + dy * dy).sqrt();
        if magnitude == 0.0 {
            return PolarSample {
                magnitude,
                orientation: 0.0,
            };
        }
        PolarSample {
            magnitude,
            orientation: fold_orientation(dy.atan2(dx).to_degrees()),
        }
    }
}

/// Maps any angle in degrees onto the undirected range `[0, 180)`.
pub fn fold_orientation(deg: f64) -> f64 {
    let mut a = deg.rem_euclid(180.0);
    if a >= 180.0 {
        a -= 180.0;
    }
    a
}

/// Polar view of a whole flow field.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarField {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
    pub orientation: Vec<f64>,
}

impl PolarField {
    pub fn sample(&self, x: usize, y: usize) -> PolarSample {
        let i = y * self.width + x;
        PolarSample {
            magnitude: self.magnitude[i],
            orientation: self.orientation[i],
        }
    }
}

pub fn to_polar(field: &FlowField) -> PolarField {
    let (magnitude, orientation) = field
        .dx
        .iter()
        .zip(field.dy.iter())
        .map(|(&dx, &dy)| {
            let p = PolarSample::from_vector(dx as f64, dy as f64);
            (p.magnitude, p.orientation)
        })
        .unzip();
    PolarField {
        width: field.width,
        height: field.height,
        magnitude,
        orientation,
    }
}
