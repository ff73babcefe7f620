//! One-dimensional k-means with k-means++ seeding, scored by the mean
//! silhouette coefficient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop once no center moves more than this.
    pub tolerance: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            seed: 42,
            restarts: 20,
            max_iterations: 300,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub attribute: String,
    pub k: usize,
    /// Strictly increasing.
    pub centers: Vec<f64>,
    /// Mean silhouette coefficient over all samples.
    pub silhouette: f64,
    /// Cluster index of every input sample.
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// As many distinct values as clusters; silhouettes of singletons are 0.
    pub degenerate: bool,
}

pub fn kmeans_silhouette(attribute: &str, samples: &[f64], k: usize) -> Result<ClusterModel> {
    kmeans_silhouette_with(attribute, samples, k, &KMeansConfig::default())
}

pub fn kmeans_silhouette_with(
    attribute: &str,
    samples: &[f64],
    k: usize,
    cfg: &KMeansConfig,
) -> Result<ClusterModel> {
    if k < 2 {
        return Err(Error::Config(format!("k must be >= 2, got {k}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Calibration {
            attribute: attribute.to_string(),
            reason: "non-finite sample".into(),
        });
    }
    let mut distinct = samples.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if samples.len() < k || distinct.len() < k {
        return Err(Error::DegenerateClusters(format!(
            "`{attribute}`: {} distinct values cannot form {k} clusters",
            distinct.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..cfg.restarts.max(1) {
        let init = kmeans_plus_plus(samples, k, &mut rng);
        let (centers, inertia) = lloyd(samples, init, cfg);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((centers, inertia));
        }
    }
    let (mut centers, inertia) = best.expect("at least one restart");
    centers.sort_by(f64::total_cmp);
    if centers.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DegenerateClusters(format!(
            "`{attribute}`: coincident centers {centers:?}"
        )));
    }
    let assignments: Vec<usize> = samples.iter().map(|&x| nearest(&centers, x)).collect();
    let silhouette = silhouette(samples, &assignments, k);
    Ok(ClusterModel {
        attribute: attribute.to_string(),
        k,
        centers,
        silhouette,
        assignments,
        inertia,
        degenerate: distinct.len() == k,
    })
}

fn nearest(centers: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centers.iter().enumerate() {
        let d = (x - c) * (x - c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn kmeans_plus_plus(samples: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k);
    centers.push(samples[rng.random_range(0..samples.len())]);
    let mut d2: Vec<f64> = samples.iter().map(|&x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = samples.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..samples.len())
        };
        let c = samples[pick];
        centers.push(c);
        for (d, &x) in d2.iter_mut().zip(samples) {
            *d = d.min((x - c).powi(2));
        }
    }
    centers
}

fn lloyd(samples: &[f64], mut centers: Vec<f64>, cfg: &KMeansConfig) -> (Vec<f64>, f64) {
    let k = centers.len();
    let mut assign = vec![0usize; samples.len()];
    for _ in 0..cfg.max_iterations {
        for (a, &x) in assign.iter_mut().zip(samples) {
            *a = nearest(&centers, x);
        }
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&a, &x) in assign.iter().zip(samples) {
            sums[a] += x;
            counts[a] += 1;
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            let updated = if counts[c] > 0 {
                sums[c] / counts[c] as f64
            } else {
                // re-seed an empty cluster at the worst-served sample
                let far = samples
                    .iter()
                    .zip(&assign)
                    .map(|(&x, &a)| (x, (x - centers[a]).abs()))
                    .max_by(|p, q| p.1.total_cmp(&q.1))
                    .map(|p| p.0)
                    .unwrap_or(centers[c]);
                far
            };
            shift = shift.max((updated - centers[c]).abs());
            centers[c] = updated;
        }
        if shift < cfg.tolerance {
            break;
        }
    }
    let inertia = samples
        .iter()
        .map(|&x| {
            let c = centers[nearest(&centers, x)];
            (x - c) * (x - c)
        })
        .sum();
    (centers, inertia)
}

/// Mean silhouette `(b − a) / max(a, b)` over all samples; members of
/// singleton clusters score 0.
pub fn silhouette(samples: &[f64], assignments: &[usize], k: usize) -> f64 {
    let n = samples.len();
    if n == 0 {
        return 0.0;
    }
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    let mut total = 0.0;
    let mut dist = vec![0.0; k];
    for (i, &xi) in samples.iter().enumerate() {
        let own = assignments[i];
        if sizes[own] <= 1 {
            continue;
        }
        dist.iter_mut().for_each(|d| *d = 0.0);
        for (&xj, &aj) in samples.iter().zip(assignments) {
            dist[aj] += (xi - xj).abs();
        }
        let a = dist[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| dist[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if !b.is_finite() {
            continue;
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn four_point_example() {
        let m = kmeans_silhouette("x", &[0.0, 1.0, 10.0, 11.0], 2).unwrap();
        assert_eq!(m.centers, vec![0.5, 10.5]);
        // by hand: s(0) = 1 - 1/10.5, s(1) = 1 - 1/9.5, mirrored for 10 and 11
        let expected = ((1.0 - 1.0 / 10.5) + (1.0 - 1.0 / 9.5)) / 2.0;
        assert!((m.silhouette - expected).abs() < 1e-12);
        assert!((m.silhouette - 0.8997).abs() < 1e-3);
        assert_eq!(m.assignments, vec![0, 0, 1, 1]);
        assert!(!m.degenerate);
    }

    #[test]
    fn singleton_clusters_are_degenerate() {
        let m = kmeans_silhouette("x", &[0.0, 1.0, 10.0, 11.0], 4).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.silhouette, 0.0);
        assert_eq!(m.centers, vec![0.0, 1.0, 10.0, 11.0]);
    }

    #[test]
    fn too_few_distinct_values() {
        let err = kmeans_silhouette("x", &[1.0, 1.0, 2.0, 2.0], 3).unwrap_err();
        assert!(matches!(err, Error::DegenerateClusters(_)));
        assert!(kmeans_silhouette("x", &[1.0], 2).is_err());
    }

    #[test]
    fn deterministic_across_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = Normal::new(0.0, 3.0).unwrap();
        let s: Vec<f64> = (0..500).map(|_| d.sample(&mut rng)).collect();
        let a = kmeans_silhouette("x", &s, 3).unwrap();
        let b = kmeans_silhouette("x", &s, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bimodal_prefers_two_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Normal::new(0.0, 1.0).unwrap();
        let b = Normal::new(10.0, 1.0).unwrap();
        let mut s: Vec<f64> = (0..2000).map(|_| a.sample(&mut rng)).collect();
        s.extend((0..2000).map(|_| b.sample(&mut rng)));
        let sil: Vec<f64> = (2..=4)
            .map(|k| kmeans_silhouette("x", &s, k).unwrap().silhouette)
            .collect();
        assert!(sil[0] > sil[1] && sil[1] >= sil[2], "{sil:?}");
    }

    proptest! {
        #[test]
        fn silhouette_bounded(s in proptest::collection::vec(-100.0f64..100.0, 4..40), k in 2usize..5) {
            if let Ok(m) = kmeans_silhouette("x", &s, k) {
                prop_assert!((-1.0..=1.0).contains(&m.silhouette));
                prop_assert!(m.centers.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(m.assignments.iter().all(|&a| a < k));
            }
        }

        #[test]
        fn tight_separated_clusters_score_high(
            base in -50.0f64..50.0,
            spread in 0.01f64..1.0,
            offsets in proptest::collection::vec(0.0f64..1.0, 10..30),
        ) {
            let sep = 10.0 * spread;
            let mut s: Vec<f64> = offsets.iter().map(|o| base + o * spread).collect();
            s.extend(offsets.iter().map(|o| base + spread + sep + o * spread));
            let m = kmeans_silhouette("x", &s, 2).unwrap();
            prop_assert!(m.silhouette > 0.85, "{}", m.silhouette);
        }
    }
}
