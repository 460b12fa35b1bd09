//! Divergence-frontier score between two text distributions.
//!
//! Both sets are embedded and quantized together with seeded k-means++.
//! The smoothed cluster histograms `p` (model) and `q` (reference) are mixed
//! as `r = λp + (1-λ)q` over a grid of `λ`, each mixture giving the point
//! `(exp(-c·KL(q‖r)), exp(-c·KL(p‖r)))`. The score is the area under the
//! resulting curve, closed with the corners `(1, 0)` and `(0, 1)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::gateway::Embedder;
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MauveConfig {
    /// Cluster count; `None` uses `min(16, n/2)` for `n` joint points.
    pub k_clusters: Option<usize>,
    pub c_scale: f64,
    pub grid_points: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for MauveConfig {
    fn default() -> Self {
        Self {
            k_clusters: None,
            c_scale: 5.0,
            grid_points: 25,
            epsilon: 1e-6,
            seed: 0,
            max_iterations: 100,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Seeded k-means++ followed by Lloyd iterations. Returns one label per point.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iterations: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 || k == 0 {
        return vec![0; n];
    }
    let k = k.min(n);
    let mut rng = seeded_rng(seed, 40);
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    while centroids.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| sq_dist(p, &centroids[nearest(p, &centroids)]))
            .collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, di) in d.iter().enumerate() {
                if target < *di {
                    chosen = i;
                    break;
                }
                target -= di;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[pick].clone());
    }

    let dim = points[0].len();
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    for _ in 0..max_iterations {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (c, (sum, count)) in centroids.iter_mut().zip(sums.into_iter().zip(&counts)) {
            if *count > 0 {
                *c = sum.into_iter().map(|s| s / *count as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

fn kl(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, y)| x * (x / y).ln())
        .sum::<f64>()
        .max(0.0)
}

fn histogram(labels: &[usize], k: usize, epsilon: f64) -> Vec<f64> {
    let mut counts = vec![0.0; k];
    for &l in labels {
        counts[l] += 1.0;
    }
    let denom = labels.len() as f64 + k as f64 * epsilon;
    counts.into_iter().map(|c| (c + epsilon) / denom).collect()
}

/// Divergence curve from `(1, 0)` to `(0, 1)`.
pub fn divergence_curve(p: &[f64], q: &[f64], config: &MauveConfig) -> Vec<(f64, f64)> {
    let g = config.grid_points.max(2);
    let lo = 1e-6;
    let hi = 1.0 - 1e-6;
    let mut curve = vec![(1.0, 0.0)];
    for i in 0..g {
        let lambda = lo + (hi - lo) * i as f64 / (g - 1) as f64;
        let r: Vec<f64> = p.iter().zip(q).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        curve.push(((-config.c_scale * kl(q, &r)).exp(), (-config.c_scale * kl(p, &r)).exp()));
    }
    curve.push((0.0, 1.0));
    curve
}

pub fn area_under_curve(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[0].0 - w[1].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

fn check_embeddings(side: &str, e: &[Vec<f64>], dim: usize) -> Result<(), MetricError> {
    if e.len() < 2 {
        return Err(MetricError::TooFewTexts {
            side: side.to_string(),
            found: e.len(),
        });
    }
    if e.iter().any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite())) {
        return Err(MetricError::Embedding(format!(
            "{side} embeddings must be finite and {dim}-dimensional"
        )));
    }
    Ok(())
}

pub fn mauve_from_embeddings(
    model: &[Vec<f64>],
    reference: &[Vec<f64>],
    config: &MauveConfig,
) -> Result<f64, MetricError> {
    let dim = model.first().map(Vec::len).unwrap_or(0);
    check_embeddings("model", model, dim)?;
    check_embeddings("reference", reference, dim)?;
    let joint: Vec<Vec<f64>> = model.iter().chain(reference).cloned().collect();
    let k = config
        .k_clusters
        .unwrap_or_else(|| (joint.len() / 2).min(16))
        .clamp(1, joint.len());
    let labels = kmeans(&joint, k, config.seed, config.max_iterations);
    let p = histogram(&labels[..model.len()], k, config.epsilon);
    let q = histogram(&labels[model.len()..], k, config.epsilon);
    let area = area_under_curve(&divergence_curve(&p, &q, config));
    Ok(area.clamp(0.0, 1.0))
}

pub fn mauve_score(
    model_texts: &[String],
    reference_texts: &[String],
    embedder: &dyn Embedder,
    config: &MauveConfig,
) -> Result<f64, MetricError> {
    for (side, texts) in [("model", model_texts), ("reference", reference_texts)] {
        if texts.len() < 2 {
            return Err(MetricError::TooFewTexts {
                side: side.to_string(),
                found: texts.len(),
            });
        }
    }
    let model = embedder.embed(model_texts)?;
    let reference = embedder.embed(reference_texts)?;
    mauve_from_embeddings(&model, &reference, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::HashEmbedder;

    fn cluster(center: f64, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| vec![center + 0.01 * i as f64, center - 0.01 * i as f64])
            .collect()
    }

    #[test]
    fn identical_sets_score_one() {
        let x = cluster(0.0, 10);
        let s = mauve_from_embeddings(&x, &x, &MauveConfig::default()).unwrap();
        assert!(s >= 1.0 - 1e-6, "{s}");
    }

    #[test]
    fn separated_clusters_score_near_zero() {
        let s = mauve_from_embeddings(&cluster(0.0, 10), &cluster(100.0, 10), &MauveConfig::default()).unwrap();
        assert!(s < 0.05, "{s}");
    }

    #[test]
    fn too_few_texts_rejected() {
        let e = HashEmbedder::default();
        let one = vec!["a".to_string()];
        let two = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(
            mauve_score(&one, &two, &e, &MauveConfig::default()),
            Err(MetricError::TooFewTexts { .. })
        ));
    }

    #[test]
    fn kmeans_is_seeded() {
        let pts: Vec<Vec<f64>> = cluster(0.0, 5).into_iter().chain(cluster(5.0, 5)).collect();
        assert_eq!(kmeans(&pts, 2, 3, 50), kmeans(&pts, 2, 3, 50));
        let l = kmeans(&pts, 2, 3, 50);
        assert!(l[..5].iter().all(|x| *x == l[0]));
        assert!(l[5..].iter().all(|x| *x == l[5]));
        assert_ne!(l[0], l[5]);
    }
}
