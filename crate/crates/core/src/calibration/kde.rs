//! Univariate Gaussian KDE with a diffusion-based bandwidth.
//!
//! The bandwidth is the fixed point `t = ξγ(t)` of the plug-in estimator
//! built on the cosine transform of a fine histogram (the linear-diffusion
//! estimator of Botev et al.). The density itself is evaluated directly as a
//! Gaussian KDE on a uniform grid.

use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of grid points used for the histogram and the density.
pub const GRID_POINTS: usize = 1 << 12;
/// Minimum sample count accepted by [`fit_kde`].
pub const MIN_SAMPLES: usize = 10;
/// Modes below this fraction of the peak density are ignored.
pub const MODE_FLOOR: f64 = 0.01;
const MAX_ROOT_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeModel {
    pub attribute: String,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    /// Grid locations of the local maxima, ascending.
    pub modes: Vec<f64>,
    /// The diffusion fixed point failed and Silverman's rule was used.
    pub fallback: bool,
}

impl KdeModel {
    /// Trapezoidal integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1]))
            .sum()
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }
}

pub fn fit_kde(attribute: &str, samples: &[f64]) -> Result<KdeModel> {
    let fail = |reason: String| Error::Calibration {
        attribute: attribute.to_string(),
        reason,
    };
    if samples.len() < MIN_SAMPLES {
        return Err(fail(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(fail("non-finite sample".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sigma = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let (min, max) = min_max(samples);
    if !(sigma > 0.0) || max <= min {
        return Err(fail("samples have zero variance".into()));
    }

    let lo = min - 3.0 * sigma;
    let hi = max + 3.0 * sigma;
    let span = hi - lo;

    let bandwidth = match diffusion_bandwidth(samples, lo, span) {
        Some(h) => (h, false),
        None => {
            let h = silverman_bandwidth(samples);
            warn!("{attribute}: diffusion bandwidth did not converge, using Silverman ({h:.6})");
            (h, true)
        }
    };
    let (h, fallback) = bandwidth;
    if !(h > 0.0 && h.is_finite()) {
        return Err(fail(format!("invalid bandwidth {h}")));
    }

    let step = span / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + i as f64 * step).collect();
    let density = gaussian_density(samples, &grid, h);
    let modes = find_modes(&grid, &density);

    Ok(KdeModel {
        attribute: attribute.to_string(),
        grid,
        density,
        bandwidth: h,
        modes,
        fallback,
    })
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

/// Silverman's rule of thumb, `0.9·min(σ, IQR/1.34)·n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Diffusion bandwidth in data units, or `None` when the fixed point
/// cannot be located.
pub fn diffusion_bandwidth(samples: &[f64], lo: f64, span: f64) -> Option<f64> {
    let n = GRID_POINTS;
    let mut hist = vec![0.0; n];
    for &x in samples {
        let idx = (((x - lo) / span) * n as f64).floor();
        let idx = (idx.max(0.0) as usize).min(n - 1);
        hist[idx] += 1.0;
    }
    let count = samples.len() as f64;
    hist.iter_mut().for_each(|h| *h /= count);

    let coeffs = dct2(&hist);
    // k² and (a_k / 2)² for k = 1..n-1
    let ksq: Vec<f64> = (1..n).map(|k| (k * k) as f64).collect();
    let a2: Vec<f64> = coeffs[1..].iter().map(|a| (a / 2.0).powi(2)).collect();

    let f = |t: f64| fixed_point_residual(t, count, &ksq, &a2);
    let t_star = solve_fixed_point(&f, count)?;
    Some(t_star.sqrt() * span)
}

/// DCT-II as used by the estimator: `a₀ = Σxⱼ`, `a_k = 2Σxⱼcos(πk(2j+1)/2n)`.
fn dct2(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    // cos(π m / 2n) for m in 0..4n covers every (k·(2j+1)) mod 4n
    let table: Vec<f64> = (0..4 * n)
        .map(|m| (PI * m as f64 / (2 * n) as f64).cos())
        .collect();
    let mut out = vec![0.0; n];
    out[0] = x.iter().sum();
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        let mut idx = k % (4 * n);
        let stride = (2 * k) % (4 * n);
        for &v in x {
            acc += v * table[idx];
            idx += stride;
            if idx >= 4 * n {
                idx -= 4 * n;
            }
        }
        *slot = 2.0 * acc;
    }
    out
}

/// `t − ξγ(t)` with seven stages of the functional recursion.
fn fixed_point_residual(t: f64, n: f64, ksq: &[f64], a2: &[f64]) -> f64 {
    const L: i32 = 7;
    let pi2 = PI * PI;
    let functional = |s: i32, time: f64| -> f64 {
        let sum: f64 = ksq
            .iter()
            .zip(a2)
            .map(|(&k2, &a)| k2.powi(s) * a * (-k2 * pi2 * time).exp())
            .sum();
        2.0 * PI.powi(2 * s) * sum
    };
    let mut f = functional(L, t);
    for s in (2..L).rev() {
        // K0 = (2s-1)!! / sqrt(2π)
        let k0 = (1..=s).map(|i| (2 * i - 1) as f64).product::<f64>() / (2.0 * PI).sqrt();
        let c = (1.0 + 0.5f64.powf(s as f64 + 0.5)) / 3.0;
        let time = (2.0 * c * k0 / n / f).powf(2.0 / (3.0 + 2.0 * s as f64));
        f = functional(s, time);
    }
    t - (2.0 * n * PI.sqrt() * f).powf(-0.4)
}

/// Locates the root of `t − ξγ(t)` on `(0, 0.1]`, widening the search
/// interval as in the reference estimator, then refining with a bracketed
/// Newton iteration.
fn solve_fixed_point(f: &dyn Fn(f64) -> f64, n: f64) -> Option<f64> {
    let n_eff = n.clamp(50.0, 1050.0);
    let mut upper = 1e-12 + 0.01 * (n_eff - 50.0) / 1000.0;
    let lower = 1e-16;
    let f_lower = f(lower);
    if !f_lower.is_finite() {
        return None;
    }
    loop {
        let f_upper = f(upper);
        if f_upper.is_finite() && f_lower.signum() != f_upper.signum() {
            return bracketed_newton(f, lower, upper, f_lower);
        }
        if upper >= 0.1 {
            return None;
        }
        upper = (upper * 2.0).min(0.1);
    }
}

fn bracketed_newton(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> Option<f64> {
    let sign_a = fa.signum();
    let mut t = 0.5 * (a + b);
    for _ in 0..MAX_ROOT_ITERATIONS {
        let ft = f(t);
        if !ft.is_finite() {
            return None;
        }
        if ft == 0.0 {
            return Some(t);
        }
        if ft.signum() == sign_a {
            a = t;
        } else {
            b = t;
        }
        if (b - a) <= 1e-14 * b.abs().max(1e-300) {
            return Some(0.5 * (a + b));
        }
        let dt = (t * 1e-6).max(1e-18);
        let slope = (f(t + dt) - ft) / dt;
        let newton = t - ft / slope;
        t = if slope.is_finite() && slope != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (ft / slope).abs() <= 1e-13 * t && newton > a && newton < b {
            return Some(t);
        }
    }
    None
}

fn gaussian_density(samples: &[f64], grid: &[f64], h: f64) -> Vec<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let norm = 1.0 / (sorted.len() as f64 * h * (2.0 * PI).sqrt());
    let cutoff = 9.0 * h;
    grid.iter()
        .map(|&x| {
            let start = sorted.partition_point(|&v| v < x - cutoff);
            let end = sorted.partition_point(|&v| v <= x + cutoff);
            let sum: f64 = sorted[start..end]
                .iter()
                .map(|&v| {
                    let z = (x - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum();
            sum * norm
        })
        .collect()
}

/// Strict local maxima whose density exceeds [`MODE_FLOOR`] of the peak.
pub fn find_modes(grid: &[f64], density: &[f64]) -> Vec<f64> {
    let peak = density.iter().cloned().fold(0.0, f64::max);
    let floor = MODE_FLOOR * peak;
    (1..density.len().saturating_sub(1))
        .filter(|&i| {
            density[i] > floor && density[i] > density[i - 1] && density[i] > density[i + 1]
        })
        .map(|i| grid[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn normal_samples(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mean, sd).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn bimodal_mixture_has_two_modes() {
        let mut s = normal_samples(5000, 0.0, 1.0, 1);
        s.extend(normal_samples(5000, 10.0, 1.0, 2));
        let kde = fit_kde("x", &s).unwrap();
        assert!(!kde.fallback);
        assert_eq!(kde.modes.len(), 2, "{:?}", kde.modes);
        assert!((kde.modes[0] - 0.0).abs() < 0.3);
        assert!((kde.modes[1] - 10.0).abs() < 0.3);
    }

    #[test]
    fn unimodal_has_one_mode() {
        let s = normal_samples(10_000, 5.0, 1.0, 3);
        let kde = fit_kde("x", &s).unwrap();
        assert_eq!(kde.modes.len(), 1, "{:?}", kde.modes);
        assert!((kde.modes[0] - 5.0).abs() < 0.3);
    }

    #[test]
    fn density_is_normalised_and_nonnegative() {
        for seed in 0..4 {
            let mut s = normal_samples(300, 0.0, 1.0, seed);
            s.extend(normal_samples(100, 6.0, 0.5, seed + 100));
            let kde = fit_kde("x", &s).unwrap();
            assert!(kde.density.iter().all(|&d| d >= 0.0));
            assert!((kde.integral() - 1.0).abs() < 0.01, "{}", kde.integral());
            assert!(kde.bandwidth > 0.0);
        }
    }

    #[test]
    fn bandwidth_near_silverman_on_normal_data() {
        let s = normal_samples(10_000, 0.0, 1.0, 7);
        let kde = fit_kde("x", &s).unwrap();
        let silverman = silverman_bandwidth(&s);
        let ratio = kde.bandwidth / silverman;
        assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rejects_small_or_constant_samples() {
        let err = fit_kde("cs_mean", &[1.0; 9]).unwrap_err();
        assert!(err.to_string().contains("cs_mean"));
        let err = fit_kde("ori_min", &[2.0; 50]).unwrap_err();
        assert!(matches!(err, Error::Calibration { ref attribute, .. } if attribute == "ori_min"));
        assert!(fit_kde("x", &[f64::NAN; 20]).is_err());
    }

    #[test]
    fn bandwidth_matches_reference_implementation() {
        // values from an independent scipy port of the diffusion estimator
        let i = (0..800).map(|i| i as f64);
        let two: Vec<f64> = i
            .clone()
            .map(|i| if i % 2.0 == 0.0 { 0.0 } else { 5.0 } + 0.8 * (1.7 * i).sin() + 0.3 * (0.31 * i * i).cos())
            .collect();
        let smooth: Vec<f64> = i.map(|i| (0.37 * i).sin() + 0.5 * (2.9 * i + 1.0).sin()).collect();
        for (samples, expected) in [(two, 0.1258941992962235), (smooth, 0.17043568988773075)] {
            let kde = fit_kde("x", &samples).unwrap();
            assert!(!kde.fallback);
            assert!((kde.bandwidth / expected - 1.0).abs() < 1e-6, "{} vs {expected}", kde.bandwidth);
        }
    }

    #[test]
    fn dct_matches_direct_sum() {
        let x: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64).collect();
        let fast = dct2(&x);
        let n = x.len();
        for (k, &got) in fast.iter().enumerate() {
            let direct: f64 = x
                .iter()
                .enumerate()
                .map(|(j, v)| v * (PI * k as f64 * (2 * j + 1) as f64 / (2 * n) as f64).cos())
                .sum();
            let want = if k == 0 { direct } else { 2.0 * direct };
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn modes_ignore_small_bumps() {
        let grid: Vec<f64> = (0..7).map(|i| i as f64).collect();
        let density = [0.0, 1.0, 0.0, 0.005, 0.0, 0.5, 0.0];
        assert_eq!(find_modes(&grid, &density), vec![1.0, 5.0]);
    }
}
