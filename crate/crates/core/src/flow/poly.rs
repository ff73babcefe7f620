//! Local quadratic expansion of image intensity.
//!
//! Around every pixel the neighbourhood is approximated by
//! `f(x) ≈ xᵀAx + bᵀx + c` using Gaussian-weighted least squares over a
//! `(2r+1)²` window. The weights are identical at every pixel, so the fit
//! reduces to six separable correlations followed by a fixed 6×6 solve.

use crate::error::{Error, Result};
use crate::frame::{GrayFrame, Plane};

use super::PyramidConfig;

/// Quadratic model `xᵀAx + bᵀx + c` in local (column, row) coordinates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QuadCoeffs {
    /// Symmetric 2×2 quadratic term.
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub c: f64,
}

/// Per-pixel quadratic coefficients for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyExpansion {
    pub width: usize,
    pub height: usize,
    pub coeffs: Vec<QuadCoeffs>,
}

impl PolyExpansion {
    pub fn at(&self, x: usize, y: usize) -> &QuadCoeffs {
        &self.coeffs[y * self.width + x]
    }

    /// Bilinear interpolation of all coefficients, borders replicated.
    pub(crate) fn sample(&self, x: f64, y: f64) -> QuadCoeffs {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
        let xa = clamp(x0 as isize, self.width);
        let xb = clamp(x0 as isize + 1, self.width);
        let ya = clamp(y0 as isize, self.height);
        let yb = clamp(y0 as isize + 1, self.height);
        let w = [
            (1.0 - fx) * (1.0 - fy),
            fx * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * fy,
        ];
        let p = [self.at(xa, ya), self.at(xb, ya), self.at(xa, yb), self.at(xb, yb)];
        let mut out = QuadCoeffs::default();
        for (wk, pk) in w.iter().zip(p.iter()) {
            out.a[0][0] += wk * pk.a[0][0];
            out.a[0][1] += wk * pk.a[0][1];
            out.a[1][1] += wk * pk.a[1][1];
            out.b[0] += wk * pk.b[0];
            out.b[1] += wk * pk.b[1];
            out.c += wk * pk.c;
        }
        out.a[1][0] = out.a[0][1];
        out
    }
}

/// Fits the local quadratic model at every pixel of `frame`.
///
/// Pixels closer than `window_radius` to the border copy the coefficients of
/// the nearest interior pixel.
pub fn polynomial_expansion(frame: &GrayFrame, cfg: &PyramidConfig) -> Result<PolyExpansion> {
    cfg.validate()?;
    expand_plane(&frame.plane(), cfg.window_radius, cfg.poly_sigma)
}

pub(crate) fn expand_plane(img: &Plane, radius: usize, sigma: f64) -> Result<PolyExpansion> {
    let n = 2 * radius + 1;
    if img.width < n || img.height < n {
        return Err(Error::Dimension(format!(
            "{}x{} image is smaller than the {n}x{n} expansion window",
            img.width, img.height
        )));
    }
    let r = radius as isize;
    let g: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let gx: Vec<f64> = (-r..=r).zip(&g).map(|(i, w)| w * i as f64).collect();
    let gxx: Vec<f64> = (-r..=r).zip(&g).map(|(i, w)| w * (i * i) as f64).collect();

    let inverse = normal_matrix_inverse(&g, radius)?;

    let (w, h) = (img.width, img.height);
    // Horizontal pass: Σ g f, Σ g x f, Σ g x² f along each row.
    let mut h0 = vec![0.0; w * h];
    let mut h1 = vec![0.0; w * h];
    let mut h2 = vec![0.0; w * h];
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        for x in radius..w - radius {
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for k in 0..n {
                let v = row[x + k - radius];
                s0 += g[k] * v;
                s1 += gx[k] * v;
                s2 += gxx[k] * v;
            }
            h0[y * w + x] = s0;
            h1[y * w + x] = s1;
            h2[y * w + x] = s2;
        }
    }

    let mut coeffs = vec![QuadCoeffs::default(); w * h];
    for y in radius..h - radius {
        for x in radius..w - radius {
            // Moments in basis order [1, x, y, x², y², xy].
            let mut m = [0.0; 6];
            for k in 0..n {
                let i = (y + k - radius) * w + x;
                m[0] += g[k] * h0[i];
                m[1] += g[k] * h1[i];
                m[2] += gx[k] * h0[i];
                m[3] += g[k] * h2[i];
                m[4] += gxx[k] * h0[i];
                m[5] += gx[k] * h1[i];
            }
            let mut r = [0.0; 6];
            for (i, ri) in r.iter_mut().enumerate() {
                *ri = (0..6).map(|j| inverse[i][j] * m[j]).sum();
            }
            coeffs[y * w + x] = QuadCoeffs {
                a: [[r[3], r[5] / 2.0], [r[5] / 2.0, r[4]]],
                b: [r[1], r[2]],
                c: r[0],
            };
        }
    }

    // Replicate the nearest interior coefficients into the border band.
    for y in 0..h {
        let sy = y.clamp(radius, h - radius - 1);
        for x in 0..w {
            let sx = x.clamp(radius, w - radius - 1);
            if sx != x || sy != y {
                coeffs[y * w + x] = coeffs[sy * w + sx];
            }
        }
    }

    Ok(PolyExpansion {
        width: w,
        height: h,
        coeffs,
    })
}

/// Inverse of the weighted Gram matrix `Σ w φᵢ φⱼ` for the basis
/// `[1, x, y, x², y², xy]` with separable weights `g(x)·g(y)`.
fn normal_matrix_inverse(g: &[f64], radius: usize) -> Result<[[f64; 6]; 6]> {
    let r = radius as isize;
    // 1-D moments Σ g(i) iᵏ for k = 0..4
    let mut mom = [0.0; 5];
    for (i, w) in (-r..=r).zip(g) {
        let mut p = 1.0;
        for m in mom.iter_mut() {
            *m += w * p;
            p *= i as f64;
        }
    }
    // exponents (px, py) of each basis function
    const EXP: [(usize, usize); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1)];
    let mut gram = [[0.0; 6]; 6];
    for (i, &(ax, ay)) in EXP.iter().enumerate() {
        for (j, &(bx, by)) in EXP.iter().enumerate() {
            gram[i][j] = mom[ax + bx] * mom[ay + by];
        }
    }
    invert6(gram).ok_or_else(|| Error::Numeric("singular expansion normal matrix".into()))
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert6(mut m: [[f64; 6]; 6]) -> Option<[[f64; 6]; 6]> {
    let mut inv = [[0.0; 6]; 6];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..6 {
        let pivot = (col..6).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col];
        for j in 0..6 {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for row in 0..6 {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    for j in 0..6 {
                        m[row][j] -= f * m[col][j];
                        inv[row][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}
