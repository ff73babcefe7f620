//! Coarse-to-fine displacement estimation from polynomial expansions.

use crate::error::{Error, Result};
use crate::frame::{GrayFrame, Plane};

use super::poly::{expand_plane, PolyExpansion};
use super::{FlowField, PyramidConfig};

/// Dense flow mapping `prev` onto `next`.
///
/// Levels whose extent would be smaller than the expansion window are
/// dropped, so small frames simply use a shallower pyramid.
pub fn estimate_flow(prev: &GrayFrame, next: &GrayFrame, cfg: &PyramidConfig) -> Result<FlowField> {
    if prev.width() != next.width() || prev.height() != next.height() {
        return Err(Error::Dimension(format!(
            "frame pair {}x{} vs {}x{}",
            prev.width(),
            prev.height(),
            next.width(),
            next.height()
        )));
    }
    let e0 = expand_frame(prev, cfg)?;
    let e1 = expand_frame(next, cfg)?;
    estimate_flow_expanded(&e0, &e1, cfg)
}

/// Polynomial expansions of every pyramid level of one frame. Computing
/// these once per frame lets a video reuse them for both adjacent pairs.
#[derive(Debug, Clone)]
pub struct FrameExpansion {
    sizes: Vec<(usize, usize)>,
    levels: Vec<PolyExpansion>,
}

impl FrameExpansion {
    pub fn width(&self) -> usize {
        self.sizes[0].0
    }

    pub fn height(&self) -> usize {
        self.sizes[0].1
    }
}

pub fn expand_frame(frame: &GrayFrame, cfg: &PyramidConfig) -> Result<FrameExpansion> {
    cfg.validate()?;
    let (w, h) = (frame.width(), frame.height());
    let min = cfg.min_extent();
    if w < min || h < min {
        return Err(Error::Dimension(format!(
            "{w}x{h} frame is smaller than the {min}x{min} expansion window"
        )));
    }
    let sizes = level_sizes(w, h, cfg);
    let levels = build_pyramid(frame.plane(), &sizes, cfg.scale)
        .iter()
        .map(|plane| expand_plane(plane, cfg.window_radius, cfg.poly_sigma))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrameExpansion { sizes, levels })
}

/// Flow between two frames expanded with the same `cfg`.
pub fn estimate_flow_expanded(
    prev: &FrameExpansion,
    next: &FrameExpansion,
    cfg: &PyramidConfig,
) -> Result<FlowField> {
    if prev.sizes != next.sizes {
        return Err(Error::Dimension(format!(
            "frame pair {}x{} vs {}x{}",
            prev.width(),
            prev.height(),
            next.width(),
            next.height()
        )));
    }
    let (w, h) = (prev.width(), prev.height());
    let avg_sigma = cfg.window_radius as f64 / 2.0;
    let mut flow: Option<(Plane, Plane)> = None;
    for level in (0..prev.sizes.len()).rev() {
        let (lw, lh) = prev.sizes[level];
        let (mut fx, mut fy) = match flow.take() {
            None => (Plane::zeros(lw, lh), Plane::zeros(lw, lh)),
            Some((fx, fy)) => upsample_flow(&fx, &fy, lw, lh),
        };
        for _ in 0..cfg.iterations {
            refine(&prev.levels[level], &next.levels[level], &mut fx, &mut fy, avg_sigma, cfg.window_radius);
        }
        flow = Some((fx, fy));
    }

    let (fx, fy) = flow.expect("at least one pyramid level");
    let dx = fx.data.iter().map(|&v| v as f32).collect();
    let dy = fy.data.iter().map(|&v| v as f32).collect();
    FlowField::new(w, h, dx, dy)
}

/// Level dimensions, finest first.
fn level_sizes(w: usize, h: usize, cfg: &PyramidConfig) -> Vec<(usize, usize)> {
    let min = cfg.min_extent();
    let mut sizes = vec![(w, h)];
    for l in 1..cfg.levels {
        let s = cfg.scale.powi(l as i32);
        let lw = (w as f64 * s).round() as usize;
        let lh = (h as f64 * s).round() as usize;
        if lw < min || lh < min {
            break;
        }
        sizes.push((lw, lh));
    }
    sizes
}

fn build_pyramid(base: Plane, sizes: &[(usize, usize)], scale: f64) -> Vec<Plane> {
    let sigma = 0.5 / scale;
    let mut levels = vec![base];
    for &(lw, lh) in &sizes[1..] {
        let prev = levels.last().expect("non-empty");
        levels.push(prev.gaussian_blur(sigma).resize(lw, lh));
    }
    levels
}

fn upsample_flow(fx: &Plane, fy: &Plane, w: usize, h: usize) -> (Plane, Plane) {
    let sx = w as f64 / fx.width as f64;
    let sy = h as f64 / fx.height as f64;
    let mut ux = fx.resize(w, h);
    let mut uy = fy.resize(w, h);
    ux.data.iter_mut().for_each(|v| *v *= sx);
    uy.data.iter_mut().for_each(|v| *v *= sy);
    (ux, uy)
}

/// One displacement update: build `AᵀA` and `AᵀΔb` per pixel, average them
/// over a Gaussian neighbourhood and solve the 2×2 system.
///
/// Constraints whose coefficients come from the replicated border band (in
/// either frame) get zero weight; the averaging fills those pixels in from
/// the interior.
fn refine(
    r0: &PolyExpansion,
    r1: &PolyExpansion,
    fx: &mut Plane,
    fy: &mut Plane,
    avg_sigma: f64,
    radius: usize,
) {
    let (w, h) = (r0.width, r0.height);
    let lo = radius as f64;
    let (hi_x, hi_y) = ((w - radius - 1) as f64, (h - radius - 1) as f64);
    let inside = |x: f64, y: f64| x >= lo && x <= hi_x && y >= lo && y <= hi_y;
    let mut m11 = Plane::zeros(w, h);
    let mut m12 = Plane::zeros(w, h);
    let mut m22 = Plane::zeros(w, h);
    let mut h1 = Plane::zeros(w, h);
    let mut h2 = Plane::zeros(w, h);

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (dx, dy) = (fx.data[i], fy.data[i]);
            let (sx, sy) = (x as f64 + dx, y as f64 + dy);
            if !inside(x as f64, y as f64) || !inside(sx, sy) {
                continue;
            }
            let p0 = r0.at(x, y);
            let p1 = r1.sample(sx, sy);

            let a11 = 0.5 * (p0.a[0][0] + p1.a[0][0]);
            let a12 = 0.5 * (p0.a[0][1] + p1.a[0][1]);
            let a22 = 0.5 * (p0.a[1][1] + p1.a[1][1]);
            let db1 = -0.5 * (p1.b[0] - p0.b[0]) + a11 * dx + a12 * dy;
            let db2 = -0.5 * (p1.b[1] - p0.b[1]) + a12 * dx + a22 * dy;

            m11.data[i] = a11 * a11 + a12 * a12;
            m12.data[i] = a12 * (a11 + a22);
            m22.data[i] = a12 * a12 + a22 * a22;
            h1.data[i] = a11 * db1 + a12 * db2;
            h2.data[i] = a12 * db1 + a22 * db2;
        }
    }

    let m11 = m11.gaussian_blur(avg_sigma);
    let m12 = m12.gaussian_blur(avg_sigma);
    let m22 = m22.gaussian_blur(avg_sigma);
    let h1 = h1.gaussian_blur(avg_sigma);
    let h2 = h2.gaussian_blur(avg_sigma);

    for i in 0..w * h {
        // tiny ridge keeps textureless regions at zero displacement
        let eps = 1e-12;
        let a = m11.data[i] + eps;
        let b = m12.data[i];
        let d = m22.data[i] + eps;
        let det = a * d - b * b;
        if det.abs() < 1e-24 {
            fx.data[i] = 0.0;
            fy.data[i] = 0.0;
            continue;
        }
        fx.data[i] = (d * h1.data[i] - b * h2.data[i]) / det;
        fy.data[i] = (a * h2.data[i] - b * h1.data[i]) / det;
    }
}
